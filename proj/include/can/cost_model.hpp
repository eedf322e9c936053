#pragma once

#include <string>
#include <vector>

#include "can/model.hpp"

namespace can {

// FLOPs convention, recorded with every report: one multiply-accumulate
// counts as 2 FLOPs; softmax and normalization cost a documented constant
// per element (5 each), the MLP activation 10 per element. The quadratic
// bucket holds every term that scales with the square of the sequence length
// (attention scores, attention-weighted values, softmax); everything else is
// linear in the sequence length.
struct FlopsSplit {
  double linear = 0.0;
  double quadratic = 0.0;

  double total() const { return linear + quadratic; }
  FlopsSplit& operator+=(const FlopsSplit& o) {
    linear += o.linear;
    quadratic += o.quadratic;
    return *this;
  }
  FlopsSplit operator+(const FlopsSplit& o) const { return {linear + o.linear, quadratic + o.quadratic}; }
  FlopsSplit operator*(double s) const { return {linear * s, quadratic * s}; }
};

// Transformer tower cost at a given sequence length: per block, QKV/output
// projections 4*L*d^2 MACs, attention scores and values 2*L^2*d MACs, MLP
// 2*L*d*mlp MACs, plus norms, softmax, activation and residual terms.
FlopsSplit vit_flops(const TowerSpec& tower, int seq_len);

struct CostReport {
  std::string method;
  std::string model;
  double mask_rate = 0.0;
  int views = 0;
  int encoder_seq = 0;
  int decoder_seq = 0;
  FlopsSplit encoder;   // patch embedding + encoder tower, all views
  FlopsSplit decoder;   // input/output projections + decoder tower, all views
  FlopsSplit head;      // projection head, all views
  FlopsSplit sigma_mlp; // noise-level embedding, all views
  long long params_encoder = 0;
  long long params_decoder = 0;
  long long params_head = 0;
  long long params_sigma = 0;

  double total_flops() const {
    return encoder.total() + decoder.total() + head.total() + sigma_mlp.total();
  }
  long long total_params() const {
    return params_encoder + params_decoder + params_head + params_sigma;
  }
};

// Per-image forward cost of one pretraining method. can: two masked views
// through the encoder, decoder over all T positions per view, head and
// noise-MLP per view. simclr: two full views, head only. mae: one masked view
// (pass mask_rate=0.75 for the standard configuration), decoder, no head.
CostReport method_flops(const std::string& method, const ModelSpec& spec, double mask_rate,
                        const std::string& model_name = "");

std::string cost_report_table(const std::vector<CostReport>& reports);

// CSV columns: method,model,mask_rate,encoder_flops,decoder_flops,head_flops,total
// (head_flops includes the noise-level MLP).
std::string cost_report_csv(const std::vector<CostReport>& reports);

}  // namespace can
