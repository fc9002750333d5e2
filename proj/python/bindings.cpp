#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "pvsn/checkpoint.hpp"
#include "pvsn/gradcheck.hpp"
#include "pvsn/pipeline.hpp"
#include "pvsn/synth.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace pvsn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_array(const Image& image) {
  py::array_t<float> out({image.height, image.width});
  std::memcpy(out.mutable_data(), image.pixels.data(), image.pixels.size() * sizeof(float));
  return out;
}

Image to_image(const FloatArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d grayscale array");
  Image img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size() * sizeof(float));
  return img;
}

py::dict report_dict(const MetricsReport& r) {
  return py::dict("accuracy"_a = r.accuracy, "precision"_a = r.precision, "recall"_a = r.recall,
                  "specificity"_a = r.specificity, "f1"_a = r.f1, "tp"_a = r.counts.tp, "tn"_a = r.counts.tn,
                  "fp"_a = r.counts.fp, "fn"_a = r.counts.fn, "degenerate"_a = r.degenerate,
                  "threshold"_a = r.threshold, "loss"_a = loss_name(r.loss), "n"_a = r.n);
}

py::dict epoch_dict(const EpochRecord& e) {
  return py::dict("epoch"_a = e.epoch, "train_loss"_a = e.train_loss, "val_loss"_a = e.val_loss,
                  "val_accuracy"_a = e.val_accuracy, "lr"_a = e.lr);
}

}  // namespace

PYBIND11_MODULE(_pvsn, m) {
  m.doc() = "Dual-palm siamese palm-vein verification (C++ core)";

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("provenance", &Dataset::provenance)
      .def_readonly("warnings", &Dataset::warnings)
      .def("subjects", &Dataset::subjects)
      .def("subset", &Dataset::subset, "subject_ids"_a)
      .def("__len__", [](const Dataset& d) { return d.samples.size(); })
      .def(
          "sample",
          [](const Dataset& d, std::size_t i) {
            const Sample& s = d.samples.at(i);
            return py::dict("subject"_a = s.subject_id, "session"_a = s.session, "instance"_a = s.instance,
                            "left"_a = to_array(s.left), "right"_a = to_array(s.right));
          },
          "index"_a, "Subject, session, instance and the two 128x128 palm images.");

  py::class_<SiameseParams<float>>(m, "Params")
      .def_property_readonly("theta",
                             [](const SiameseParams<float>& p) {
                               return py::make_tuple(p.theta0.item(), p.theta1.item());
                             })
      .def_property_readonly("margin", [](const SiameseParams<float>& p) { return p.margin; })
      .def("state",
           [](const SiameseParams<float>& p) {
             py::dict out;
             for (const auto& [name, t] : p.state()) {
               std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
               py::array_t<float> a(shape);
               std::memcpy(a.mutable_data(), t.values().data(), t.size() * sizeof(float));
               out[py::str(name)] = a;
             }
             return out;
           },
           "Every checkpointed tensor by name, as copies.");

  m.def("synth_generate",
        [](std::size_t subjects, std::size_t sessions, std::size_t instances, std::uint64_t seed,
           std::optional<std::filesystem::path> out) {
          return synth_generate({subjects, sessions, instances, seed}, out);
        },
        "subjects"_a = 20, "sessions"_a = 2, "instances"_a = 3, "seed"_a = 7, "out"_a = py::none());
  m.def("load_dataset", &load_dataset, "root"_a);
  m.def("write_dataset", &write_dataset, "dataset"_a, "root"_a);
  m.def(
      "roi_preprocess", [](const FloatArray& raw, double max_value) { return to_array(roi_preprocess(to_image(raw), max_value)); },
      "image"_a, "max_value"_a = 255.0);
  m.def(
      "split",
      [](const Dataset& d, double train_fraction, std::uint64_t seed) { return split(d, {train_fraction, seed}); },
      "dataset"_a, "train_fraction"_a = 0.70, "seed"_a = 1);

  m.def("init_params", [](std::uint64_t seed) { return init_params<float>(seed); }, "seed"_a = 1);
  m.def("save_checkpoint", &save_checkpoint, "params"_a, "path"_a);
  m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p); }, "path"_a);
  m.def(
      "extract_features",
      [](SiameseParams<float>& params, const FloatArray& images) {
        if (images.ndim() != 3) throw std::invalid_argument("expected images shaped [N, 128, 128]");
        const auto n = static_cast<std::size_t>(images.shape(0));
        std::vector<float> pix(images.data(), images.data() + images.size());
        const auto feats =
            extract_features(params, Tensor<float>({n, 1, static_cast<std::size_t>(images.shape(1)),
                                                    static_cast<std::size_t>(images.shape(2))},
                                                   std::move(pix)),
                             ForwardMode{});
        py::array_t<float> out({feats.dim(0), feats.dim(1)});
        std::memcpy(out.mutable_data(), feats.values().data(), feats.size() * sizeof(float));
        return out;
      },
      "params"_a, "images"_a, "Inference-mode embeddings, one row per image.");
  m.def(
      "verify",
      [](SiameseParams<float>& params, const FloatArray& la, const FloatArray& ra, const FloatArray& lb,
         const FloatArray& rb, double threshold) {
        const auto r = verify(params, to_image(la), to_image(ra), to_image(lb), to_image(rb), threshold);
        return py::dict("distance"_a = r.distance, "probability"_a = r.probability,
                        "genuine"_a = r.decision == Decision::Genuine);
      },
      "params"_a, "left_a"_a, "right_a"_a, "left_b"_a, "right_b"_a, "threshold"_a = 0.5);

  m.def(
      "evaluate",
      [](SiameseParams<float>& params, const Dataset& test, std::size_t pairs_per_class, double threshold,
         std::uint64_t seed) { return report_dict(evaluate(params, test, {pairs_per_class, threshold, seed})); },
      "params"_a, "test"_a, "pairs_per_class"_a = 500, "threshold"_a = 0.5, "seed"_a = 1);
  m.def(
      "metrics",
      [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        ConfusionCounts c;
        c.tp = tp, c.fp = fp, c.fn = fn, c.tn = tn;
        return report_dict(metrics(c));
      },
      "tp"_a, "fp"_a, "fn"_a, "tn"_a);
  m.def(
      "contrastive_loss",
      [](double d, bool genuine, double margin) { return contrastive_loss(Tensor<double>::scalar(d), genuine, margin).item(); },
      "distance"_a, "genuine"_a, "margin"_a = 1.0);
  m.def(
      "bce_loss", [](double p, bool genuine) { return bce_loss(Tensor<double>::scalar(p), genuine).item(); },
      "probability"_a, "genuine"_a);

  m.def(
      "run_experiment",
      [](const Dataset& dataset, const std::map<std::string, std::string>& settings,
         std::optional<std::filesystem::path> out, std::function<void(py::dict)> on_epoch) {
        const RunConfig config = apply_config(settings);
        EpochCallback cb;
        if (on_epoch) cb = [&](const EpochRecord& e) { on_epoch(epoch_dict(e)); };
        const auto outcome = run_experiment(config, dataset, cb);
        if (out) save_run(config, outcome, *out);
        py::list history;
        for (const auto& e : outcome.trained.history.epochs) history.append(epoch_dict(e));
        py::list distances;
        for (const auto& s : outcome.test_scores) distances.append(py::make_tuple(s.distance, s.genuine));
        return py::dict("params"_a = outcome.trained.params, "history"_a = history,
                        "best_epoch"_a = outcome.trained.history.best_epoch,
                        "stop_reason"_a = outcome.trained.history.stop_reason, "report"_a = report_dict(outcome.test_report),
                        "test_distances"_a = distances, "test_subjects"_a = outcome.parts.test.subjects());
      },
      "dataset"_a, "settings"_a, "out"_a = py::none(), "on_epoch"_a = nullptr,
      "Partition, train and score held-out pairs; settings use the config-file keys.");

  m.def(
      "gradcheck",
      [](std::uint64_t seed) {
        py::list out;
        GradCheckOptions opts;
        opts.seed = seed;
        for (const auto& r : run_gradcheck_suite(opts)) {
          out.append(py::dict("op"_a = r.op, "max_relative_error"_a = r.max_relative_error, "tolerance"_a = r.tolerance,
                              "passed"_a = r.passed()));
        }
        return out;
      },
      "seed"_a = 0);
}
