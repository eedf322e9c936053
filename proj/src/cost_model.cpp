#include "can/cost_model.hpp"

#include <cstdio>
#include <sstream>

namespace can {
namespace {

constexpr double kMac = 2.0;        // multiply-accumulate
constexpr double kNormPerElem = 5.0;
constexpr double kSoftmaxPerElem = 5.0;
constexpr double kActPerElem = 10.0;

double dbl(long long v) { return static_cast<double>(v); }

FlopsSplit patch_embed_flops(const ModelSpec& spec, int seq) {
  FlopsSplit f;
  f.linear = kMac * dbl(seq) * dbl(spec.patch_dim()) * dbl(spec.encoder.width) +
             2.0 * dbl(seq) * dbl(spec.encoder.width);  // bias + positional add
  return f;
}

FlopsSplit decoder_io_flops(const ModelSpec& spec) {
  const int t = spec.tokens();
  FlopsSplit f;
  // scatter/positional/sigma adds in encoder width, then in/out projections
  f.linear = 3.0 * dbl(t) * dbl(spec.encoder.width) +
             kMac * dbl(t) * dbl(spec.encoder.width) * dbl(spec.decoder.width) +
             kMac * dbl(t) * dbl(spec.decoder.width) * dbl(spec.patch_dim()) +
             dbl(t) * (dbl(spec.decoder.width) + dbl(spec.patch_dim()));
  return f;
}

FlopsSplit head_flops(const ModelSpec& spec) {
  FlopsSplit f;
  long long in = spec.encoder.width;
  for (int i = 0; i < spec.head.hidden_layers; ++i) {
    f.linear += kMac * dbl(in) * dbl(spec.head.hidden_dim) + dbl(spec.head.hidden_dim) +
                dbl(spec.head.hidden_dim) * (kNormPerElem + 1.0);  // batch norm + relu
    in = spec.head.hidden_dim;
  }
  f.linear += kMac * dbl(in) * dbl(spec.head.out_dim) + dbl(spec.head.out_dim) +
              3.0 * dbl(spec.head.out_dim);  // final linear + normalize
  return f;
}

FlopsSplit sigma_mlp_flops(const ModelSpec& spec) {
  const double d = dbl(spec.encoder.width);
  FlopsSplit f;
  f.linear = 2.0 * d                      // sinusoid
             + 2.0 * (kMac * d * d + d)   // two linear layers
             + kActPerElem * d;
  return f;
}

long long tower_params(const TowerSpec& t) {
  const long long d = t.width, mlp = t.mlp_dim;
  const long long block = 4 * (d * d + d)     // qkv + out projections
                          + d * mlp + mlp     // fc1
                          + mlp * d + d       // fc2
                          + 4 * d;            // two layer norms
  return t.depth * block + 2 * d;  // final norm
}

}  // namespace

FlopsSplit vit_flops(const TowerSpec& tower, int seq_len) {
  check_arg(seq_len >= 1, "vit_flops: sequence length must be >= 1");
  if (tower.depth == 0) return {};
  const double L = dbl(seq_len);
  const double d = dbl(tower.width);
  const double mlp = dbl(tower.mlp_dim);
  const double heads = dbl(tower.heads);

  FlopsSplit block;
  block.linear = kMac * 4.0 * L * d * d + 4.0 * L * d;        // projections + biases
  block.quadratic = kMac * 2.0 * L * L * d                     // scores + values
                    + kSoftmaxPerElem * heads * L * L;
  block.linear += kMac * 2.0 * L * d * mlp + L * (mlp + d);   // mlp + biases
  block.linear += kActPerElem * L * mlp;
  block.linear += 2.0 * kNormPerElem * L * d + 2.0 * L * d;   // norms + residuals

  FlopsSplit total = block * static_cast<double>(tower.depth);
  total.linear += kNormPerElem * L * d;  // final norm
  return total;
}

CostReport method_flops(const std::string& method, const ModelSpec& spec, double mask_rate,
                        const std::string& model_name) {
  check_arg(method == "can" || method == "simclr" || method == "mae",
            "method_flops: unknown method '" + method + "'");
  spec.validate();
  const int t = spec.tokens();
  const int kept = unmasked_count_for(t, mask_rate);
  check_arg(kept >= 1, "method_flops: masking leaves no tokens");

  CostReport r;
  r.method = method;
  r.model = model_name;
  r.mask_rate = mask_rate;

  const long long d = spec.encoder.width;
  const long long embed_params = static_cast<long long>(spec.patch_dim()) * d + d;
  const long long enc_params = embed_params + tower_params(spec.encoder);
  const long long dec_params =
      spec.decoder.depth == 0
          ? 0
          : d  // mask token
                + d * spec.decoder.width + spec.decoder.width + tower_params(spec.decoder) +
                static_cast<long long>(spec.decoder.width) * spec.patch_dim() + spec.patch_dim();
  long long head_params = 0;
  {
    long long in = d;
    for (int i = 0; i < spec.head.hidden_layers; ++i) {
      head_params += in * spec.head.hidden_dim + 3LL * spec.head.hidden_dim;
      in = spec.head.hidden_dim;
    }
    head_params += in * spec.head.out_dim + spec.head.out_dim;
  }
  const long long sigma_params = 2 * (d * d + d);

  if (method == "can") {
    r.views = 2;
    r.encoder_seq = kept;
    r.decoder_seq = t;
    r.encoder = (patch_embed_flops(spec, kept) + vit_flops(spec.encoder, kept)) * 2.0;
    if (spec.decoder.depth > 0)
      r.decoder = (decoder_io_flops(spec) + vit_flops(spec.decoder, t)) * 2.0;
    r.head = head_flops(spec) * 2.0;
    r.sigma_mlp = sigma_mlp_flops(spec) * 2.0;
    r.params_encoder = enc_params;
    r.params_decoder = dec_params;
    r.params_head = head_params;
    r.params_sigma = sigma_params;
  } else if (method == "simclr") {
    r.views = 2;
    r.encoder_seq = t;
    r.decoder_seq = 0;
    r.encoder = (patch_embed_flops(spec, t) + vit_flops(spec.encoder, t)) * 2.0;
    r.head = head_flops(spec) * 2.0;
    r.params_encoder = enc_params;
    r.params_head = head_params;
  } else {
    r.views = 1;
    r.encoder_seq = kept;
    r.decoder_seq = t;
    r.encoder = patch_embed_flops(spec, kept) + vit_flops(spec.encoder, kept);
    if (spec.decoder.depth > 0) r.decoder = decoder_io_flops(spec) + vit_flops(spec.decoder, t);
    r.params_encoder = enc_params;
    r.params_decoder = dec_params;
  }
  return r;
}

std::string cost_report_table(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  char line[256];
  os << "forward FLOPs per image (MAC = 2 FLOPs; norms/softmax 5 per element)\n";
  std::snprintf(line, sizeof(line), "%-8s %-10s %9s %6s %12s %12s %12s %12s %12s %10s\n",
                "method", "model", "mask", "views", "encoder", "decoder", "head", "sigma_mlp",
                "total", "params");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line),
                  "%-8s %-10s %9.2f %6d %12.4g %12.4g %12.4g %12.4g %12.4g %10lld\n",
                  r.method.c_str(), r.model.c_str(), r.mask_rate, r.views, r.encoder.total(),
                  r.decoder.total(), r.head.total(), r.sigma_mlp.total(), r.total_flops(),
                  r.total_params());
    os << line;
  }
  return os.str();
}

std::string cost_report_csv(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << "method,model,mask_rate,encoder_flops,decoder_flops,head_flops,total\n";
  char line[256];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%s,%s,%.6g,%.10g,%.10g,%.10g,%.10g\n", r.method.c_str(),
                  r.model.c_str(), r.mask_rate, r.encoder.total(), r.decoder.total(),
                  r.head.total() + r.sigma_mlp.total(), r.total_flops());
    os << line;
  }
  return os.str();
}

}  // namespace can
