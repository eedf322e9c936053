// Python bindings for the core operations: patch/mask machinery, the three
// objectives, schedules, the cost model and the synthetic data generator.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "can/cost_model.hpp"
#include "can/dataset.hpp"
#include "can/objectives.hpp"
#include "can/optimizer.hpp"
#include "can/patches.hpp"

namespace py = pybind11;
using can::MaskVector;
using can::MatD;

namespace {

MatD as_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  can::check_arg(a.ndim() == 2, "expected a 2-d array");
  MatD m(a.shape(0), a.shape(1));
  std::memcpy(m.data(), a.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

py::array_t<double> to_numpy(const MatD& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::memcpy(a.mutable_data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return a;
}

MaskVector mask_from_numpy(const py::array_t<std::uint8_t>& bits) {
  can::check_arg(bits.ndim() == 1, "mask must be 1-d");
  MaskVector m;
  m.bits.assign(bits.data(), bits.data() + bits.shape(0));
  m.unmasked_count = 0;
  for (auto b : m.bits) m.unmasked_count += b == 0 ? 1 : 0;
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "core ops: patching, masking, objectives, schedules, cost model";

  m.def(
      "patchify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image, int p) {
        can::check_arg(image.ndim() == 3 && image.shape(2) == 3, "image must be HxWx3");
        const int h = static_cast<int>(image.shape(0));
        const int w = static_cast<int>(image.shape(1));
        MatD img(h, static_cast<Eigen::Index>(w) * 3);
        std::memcpy(img.data(), image.data(),
                    sizeof(double) * static_cast<std::size_t>(img.size()));
        const auto seq = can::patchify<double>(img, h, w, p);
        return py::make_tuple(to_numpy(seq.patches), seq.grid_h, seq.grid_w);
      },
      py::arg("image"), py::arg("patch"),
      "split an HxWx3 image into row-major patches, one flattened patch per row");

  m.def(
      "unpatchify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& patches,
         int grid_h, int grid_w, int p) {
        can::PatchSequenceT<double> seq;
        seq.patches = as_matrix(patches);
        seq.grid_h = grid_h;
        seq.grid_w = grid_w;
        seq.patch = p;
        const MatD img = can::unpatchify(seq);
        py::array_t<double> out({static_cast<py::ssize_t>(grid_h * p),
                                 static_cast<py::ssize_t>(grid_w * p), py::ssize_t(3)});
        std::memcpy(out.mutable_data(), img.data(),
                    sizeof(double) * static_cast<std::size_t>(img.size()));
        return out;
      },
      py::arg("patches"), py::arg("grid_h"), py::arg("grid_w"), py::arg("patch"));

  m.def(
      "sample_mask",
      [](int total, double mask_rate, std::uint64_t seed) {
        can::Rng rng(seed);
        const MaskVector mask = can::sample_mask(total, mask_rate, rng);
        py::array_t<std::uint8_t> bits(static_cast<py::ssize_t>(mask.bits.size()));
        std::memcpy(bits.mutable_data(), mask.bits.data(), mask.bits.size());
        return py::make_tuple(bits, mask.unmasked_count);
      },
      py::arg("total"), py::arg("mask_rate"), py::arg("seed"),
      "binary mask with an exact unmasked count (1 = masked)");

  m.def(
      "gather_unmasked",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& tokens,
         const py::array_t<std::uint8_t>& bits) {
        const MaskVector mask = mask_from_numpy(bits);
        auto [kept, plan] = can::gather_unmasked(as_matrix(tokens), mask);
        return py::make_tuple(to_numpy(kept), plan.kept_indices);
      },
      py::arg("tokens"), py::arg("mask"));

  m.def(
      "scatter_with_mask_token",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& encoded,
         const py::array_t<std::uint8_t>& bits,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& token) {
        const MaskVector mask = mask_from_numpy(bits);
        const auto plan = can::make_gather_plan(mask);
        can::check_arg(token.ndim() == 1, "mask token must be 1-d");
        can::VecX<double> t(token.shape(0));
        std::memcpy(t.data(), token.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
        return to_numpy(can::scatter_with_mask_token(as_matrix(encoded), plan, t));
      },
      py::arg("encoded"), py::arg("mask"), py::arg("mask_token"));

  m.def(
      "info_nce",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& u1,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& u2, double tau) {
        return can::info_nce<double>(as_matrix(u1), as_matrix(u2), tau);
      },
      py::arg("u1"), py::arg("u2"), py::arg("tau") = 0.1);

  m.def(
      "recon_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& clean,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& xhat,
         const py::array_t<std::uint8_t>& bits) {
        return can::recon_loss<double>(as_matrix(clean), as_matrix(xhat), mask_from_numpy(bits));
      },
      py::arg("clean"), py::arg("xhat"), py::arg("mask"));

  m.def(
      "denoise_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& noise_field,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& xhat,
         const py::array_t<std::uint8_t>& bits) {
        return can::denoise_loss<double>(as_matrix(noise_field), as_matrix(xhat),
                                         mask_from_numpy(bits));
      },
      py::arg("noise_field"), py::arg("xhat"), py::arg("mask"));

  m.def(
      "loss_weights",
      [](double lambda_infonce, double lambda) {
        can::LossWeights w;
        w.lambda_infonce = lambda_infonce;
        w.lambda = lambda;
        w.validate();
        return py::make_tuple(w.lambda_infonce, w.lambda_rec(), w.lambda_denoise());
      },
      py::arg("lambda_infonce"), py::arg("lambda"),
      "(lambda_infonce, lambda_rec, lambda_denoise), summing to 1");

  m.def(
      "lr_at",
      [](long long step, double base_lr, int batch_size, int warmup_epochs, int total_epochs,
         long long steps_per_epoch) {
        can::TrainConfig cfg;
        cfg.base_lr = base_lr;
        cfg.batch_size = batch_size;
        cfg.warmup_epochs = warmup_epochs;
        cfg.total_epochs = total_epochs;
        return can::lr_at(step, cfg, steps_per_epoch);
      },
      py::arg("step"), py::arg("base_lr"), py::arg("batch_size"), py::arg("warmup_epochs"),
      py::arg("total_epochs"), py::arg("steps_per_epoch"));

  m.def(
      "method_flops",
      [](const std::string& method, const std::string& model, double mask_rate) {
        can::ModelSpec spec;
        if (model == "vit-micro") spec = can::vit_micro();
        else if (model == "vit-s") spec = can::vit_s();
        else if (model == "vit-b") spec = can::vit_b();
        else if (model == "vit-l") spec = can::vit_l();
        else if (model == "vit-h") spec = can::vit_h();
        else can::check_arg(false, "unknown model '" + model + "'");
        const can::CostReport r = can::method_flops(method, spec, mask_rate, model);
        py::dict d;
        d["method"] = r.method;
        d["model"] = r.model;
        d["mask_rate"] = r.mask_rate;
        d["views"] = r.views;
        d["encoder_flops"] = r.encoder.total();
        d["decoder_flops"] = r.decoder.total();
        d["head_flops"] = r.head.total() + r.sigma_mlp.total();
        d["total_flops"] = r.total_flops();
        d["params"] = r.total_params();
        return d;
      },
      py::arg("method"), py::arg("model"), py::arg("mask_rate"));

  m.def(
      "synthetic_dataset",
      [](int count, int num_classes, int height, int width, std::uint64_t seed) {
        can::SyntheticConfig cfg;
        cfg.count = count;
        cfg.num_classes = num_classes;
        cfg.height = height;
        cfg.width = width;
        cfg.seed = seed;
        const can::Dataset ds = can::make_synthetic_dataset(cfg);
        py::array_t<float> images({static_cast<py::ssize_t>(count), static_cast<py::ssize_t>(height),
                                   static_cast<py::ssize_t>(width), py::ssize_t(3)});
        py::array_t<int> labels(static_cast<py::ssize_t>(count));
        for (int i = 0; i < count; ++i) {
          const auto& item = ds.items[static_cast<std::size_t>(i)];
          std::memcpy(images.mutable_data(i, 0, 0, 0), item.image.data.data(),
                      sizeof(float) * item.image.data.size());
          labels.mutable_at(i) = item.label;
        }
        return py::make_tuple(images, labels);
      },
      py::arg("count"), py::arg("num_classes") = 4, py::arg("height") = 32, py::arg("width") = 32,
      py::arg("seed") = 1);
}
