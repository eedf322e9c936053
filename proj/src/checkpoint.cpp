#include "can/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "can/checks.hpp"

namespace can {
namespace {

constexpr char kMagic[8] = {'C', 'A', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  check_run(static_cast<bool>(in), "checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  check_run(static_cast<bool>(in), "checkpoint: truncated string");
  return s;
}

void put_array(std::ostream& out, const std::string& name, const MatF& m) {
  put_string(out, name);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
}

void write_spec(std::ostream& out, const ModelSpec& s) {
  for (int v : {s.encoder.depth, s.encoder.width, s.encoder.heads, s.encoder.mlp_dim,
                s.decoder.depth, s.decoder.width, s.decoder.heads, s.decoder.mlp_dim,
                s.head.hidden_dim, s.head.hidden_layers, s.head.out_dim, s.patch, s.image_h,
                s.image_w})
    put<std::int32_t>(out, v);
}

ModelSpec read_spec(std::istream& in) {
  ModelSpec s;
  int* fields[] = {&s.encoder.depth, &s.encoder.width, &s.encoder.heads, &s.encoder.mlp_dim,
                   &s.decoder.depth, &s.decoder.width, &s.decoder.heads, &s.decoder.mlp_dim,
                   &s.head.hidden_dim, &s.head.hidden_layers, &s.head.out_dim, &s.patch,
                   &s.image_h, &s.image_w};
  for (int* f : fields) *f = get<std::int32_t>(in);
  return s;
}

void read_header(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  check_arg(static_cast<bool>(in) && std::memcmp(magic, kMagic, 8) == 0,
            "checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  check_arg(version == kVersion, "checkpoint: unsupported version");
}

}  // namespace

TrainState init_train_state(const ModelSpec& spec, std::uint64_t seed) {
  TrainState st;
  st.spec = spec;
  st.params = init_params<float>(spec, Rng(seed));
  st.m = zeros_like(st.params);
  st.v = zeros_like(st.params);
  st.step = 0;
  st.seed = seed;
  return st;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check_run(static_cast<bool>(out), "checkpoint: cannot open " + tmp + " for writing");
    out.write(kMagic, 8);
    put<std::uint32_t>(out, kVersion);
    write_spec(out, state.spec);
    put<std::int64_t>(out, state.step);
    put<std::uint64_t>(out, state.seed);

    std::vector<std::pair<std::string, const MatF*>> arrays;
    auto& mut = const_cast<TrainState&>(state);
    visit_params(mut.params, [&](const std::string& n, MatF& m, ParamKind) {
      arrays.emplace_back(n, &m);
    });
    visit_params(mut.m, [&](const std::string& n, MatF& m, ParamKind k) {
      if (k != ParamKind::buffer) arrays.emplace_back("m:" + n, &m);
    });
    visit_params(mut.v, [&](const std::string& n, MatF& m, ParamKind k) {
      if (k != ParamKind::buffer) arrays.emplace_back("v:" + n, &m);
    });
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (auto& [name, mat] : arrays) put_array(out, name, *mat);
    check_run(static_cast<bool>(out), "checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  check_run(!ec, "checkpoint: rename to " + path + " failed: " + ec.message());
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_run(static_cast<bool>(in), "checkpoint: cannot open " + path);
  read_header(in);
  TrainState st;
  st.spec = read_spec(in);
  st.spec.validate();
  st.step = get<std::int64_t>(in);
  st.seed = get<std::uint64_t>(in);

  // Allocate the full structure, then fill arrays by name.
  st.params = init_params<float>(st.spec, Rng(0));
  st.m = zeros_like(st.params);
  st.v = zeros_like(st.params);

  std::vector<ParamRef<float>> refs;
  visit_params(st.params, [&](const std::string& n, MatF& m, ParamKind k) {
    refs.push_back({n, &m, k});
  });
  visit_params(st.m, [&](const std::string& n, MatF& m, ParamKind k) {
    if (k != ParamKind::buffer) refs.push_back({"m:" + n, &m, k});
  });
  visit_params(st.v, [&](const std::string& n, MatF& m, ParamKind k) {
    if (k != ParamKind::buffer) refs.push_back({"v:" + n, &m, k});
  });

  const auto count = get<std::uint32_t>(in);
  check_arg(count == refs.size(), "checkpoint: array count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    check_arg(name == refs[i].name, "checkpoint: unexpected array '" + name + "'");
    MatF& m = *refs[i].mat;
    check_arg(m.rows() == static_cast<Eigen::Index>(rows) &&
                  m.cols() == static_cast<Eigen::Index>(cols),
              "checkpoint: shape mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
    check_run(static_cast<bool>(in), "checkpoint: truncated array data");
  }
  return st;
}

ModelSpec peek_checkpoint_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_run(static_cast<bool>(in), "checkpoint: cannot open " + path);
  read_header(in);
  return read_spec(in);
}

}  // namespace can
