#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "deepnmt/checkpoint.hpp"
#include "deepnmt/cli.hpp"
#include "deepnmt/config.hpp"
#include "deepnmt/init.hpp"
#include "deepnmt/kernels.hpp"
#include "deepnmt/layers.hpp"
#include "deepnmt/ops.hpp"
#include "deepnmt/probes.hpp"

namespace py = pybind11;
using namespace deepnmt;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

std::map<std::string, std::string> to_kv(const py::dict& d) {
  std::map<std::string, std::string> kv;
  for (auto item : d) {
    std::string key = py::str(item.first);
    py::handle v = item.second;
    if (py::isinstance<py::bool_>(v)) {
      kv[key] = v.cast<bool>() ? "1" : "0";
    } else {
      kv[key] = py::str(v);
    }
  }
  return kv;
}

ModelConfig model_config(const py::dict& d) {
  auto kv = to_kv(d);
  if (!kv.count("layers")) kv["layers"] = "2";
  return parse_run_config(kv).model;
}

py::dict record_dict(const ProbeRecord& r) {
  py::dict d;
  d["stack"] = std::string(to_string(r.stack));
  d["layer"] = r.layer;
  d["sublayer"] = std::string(to_string(r.kind));
  d["norm_o"] = r.norm_o;
  d["norm_r"] = r.norm_r;
  d["norm_z"] = r.norm_z;
  d["beta_ln"] = r.beta_ln();
  d["beta_rc"] = r.beta_rc();
  d["beta"] = r.beta();
  d["var_r"] = r.var_r;
  return d;
}

}  // namespace

PYBIND11_MODULE(_deepnmt, m) {
  m.doc() = "Sequence-to-sequence Transformer laboratory core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<UnsupportedLayoutError>(m, "UnsupportedLayoutError", PyExc_ValueError);

  m.def("glorot_bound", &glorot_bound, py::arg("d_in"), py::arg("d_out"));
  m.def(
      "ds_init_bound",
      [](std::size_t d_in, std::size_t d_out, std::size_t layer, double alpha) {
        InitSpec s;
        s.policy = InitPolicy::ds_init;
        s.d_in = d_in;
        s.d_out = d_out;
        s.layer = layer;
        s.alpha = alpha;
        return ds_init_bound(s);
      },
      py::arg("d_in"), py::arg("d_out"), py::arg("layer"), py::arg("alpha") = 1.0);
  m.def(
      "sample_weights",
      [](const std::string& policy, std::size_t d_in, std::size_t d_out, std::size_t layer,
         double alpha, double sigma, std::uint64_t seed) {
        InitSpec s;
        s.policy = parse_init_policy(policy);
        s.d_in = d_in;
        s.d_out = d_out;
        s.layer = layer;
        s.alpha = alpha;
        s.sigma = sigma;
        Rng rng(seed);
        return to_numpy(sample_weights(rng, s));
      },
      py::arg("policy"), py::arg("d_in"), py::arg("d_out"), py::arg("layer") = 1,
      py::arg("alpha") = 1.0, py::arg("sigma") = 0.02, py::arg("seed") = 0);
  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("d"), py::arg("warmup"));
  m.def("average_mask", [](std::size_t n) { return to_numpy(average_mask(n)); });
  m.def("positional_encoding",
        [](std::size_t n, std::size_t d) { return to_numpy(positional_encoding(n, d)); });
  m.def("length_penalty", &length_penalty, py::arg("length"), py::arg("alpha"));
  m.def("max_decode_length", &max_decode_length);
  m.def(
      "softmax",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        Tensor t = from_numpy(x);
        return to_numpy(softmax(t, t.rank() - 1));
      },
      py::arg("x"));
  m.def(
      "layer_norm",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double eps) {
        Tape t;
        Tensor xv = from_numpy(x);
        const std::size_t d = xv.cols();
        Var g = t.constant(Tensor({d}, 1.0));
        Var b = t.constant(Tensor({d}, 0.0));
        return to_numpy(t.value(ad::layer_norm(t, t.constant(xv), g, b, eps)));
      },
      py::arg("x"), py::arg("eps") = kLayerNormEps);

  py::class_<Model>(m, "Model")
      .def(py::init([](const py::dict& cfg, std::uint64_t seed) {
             Rng rng(seed);
             return build(model_config(cfg), rng);
           }),
           py::arg("config"), py::arg("seed") = 1)
      .def_property_readonly("config", [](const Model& mo) { return mo.config.to_kv(); })
      .def("count_params", [](const Model& mo) { return count_params(mo.params); })
      .def("decoder_attention_params", [](const Model& mo, std::size_t l) {
        return decoder_attention_params(mo, l);
      })
      .def("param_names", [](const Model& mo) { return mo.params.names(); })
      .def("get_param", [](const Model& mo, const std::string& n) { return to_numpy(mo.params.at(n)); })
      .def("set_param",
           [](Model& mo, const std::string& n,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
             Tensor t = from_numpy(a);
             Tensor& dst = mo.params.at(n);
             if (t.shape() != dst.shape()) {
               throw DimensionError("set_param: shape " + shape_str(t.shape()) + " vs " +
                                    shape_str(dst.shape()));
             }
             dst = std::move(t);
           })
      .def("init_bound", [](const Model& mo, const std::string& n) { return mo.params.init(n).bound; })
      .def(
          "loss",
          [](const Model& mo, const std::vector<std::vector<int>>& src,
             const std::vector<std::vector<int>>& tgt, double ls) {
            if (src.size() != tgt.size()) throw DimensionError("source/target counts differ");
            std::vector<SequencePair> pairs;
            for (std::size_t i = 0; i < src.size(); ++i) {
              SequencePair p{src[i], tgt[i]};
              p.source.push_back(kEos);
              p.target.push_back(kEos);
              pairs.push_back(std::move(p));
            }
            return batch_loss(mo, make_batch(pairs), ls);
          },
          py::arg("sources"), py::arg("targets"), py::arg("label_smoothing") = 0.1)
      .def(
          "greedy",
          [](const Model& mo, const std::vector<std::vector<int>>& sources) {
            std::vector<std::vector<int>> out;
            for (auto& h : greedy_decode(mo, sources)) out.push_back(h.tokens);
            return out;
          },
          py::arg("sources"))
      .def(
          "beam_search",
          [](const Model& mo, const std::vector<int>& source, std::size_t beam, double lp) {
            Hypothesis h = beam_search(mo, source, beam, lp);
            return py::make_tuple(h.tokens, h.score);
          },
          py::arg("source"), py::arg("beam") = 4, py::arg("len_penalty") = 0.6)
      .def(
          "measure_ratios",
          [](const Model& mo, std::size_t tokens, std::uint64_t seed) {
            TaskSpec task;
            task.vocab = std::min(mo.config.src_vocab, mo.config.tgt_vocab);
            Rng rng(seed);
            const Batch batch = make_batch(sample_tokens(task, rng, tokens));
            py::list out;
            for (const auto& r : measure_ratios(mo, batch).records) out.append(record_dict(r));
            return out;
          },
          py::arg("tokens") = 3000, py::arg("seed") = 7)
      .def(
          "save",
          [](const Model& mo, const std::filesystem::path& path) {
            save_checkpoint(path, CheckpointBundle{mo.config, mo.params, std::nullopt, 0});
          })
      .def_static("load", [](const std::filesystem::path& path) { return load_checkpoint(path).model(); });

  m.def(
      "train",
      [](const py::dict& cfg) {
        RunConfig rc = parse_run_config(to_kv(cfg));
        Rng init = Rng(rc.train.seed).fork(0);
        Model model = build(rc.model, init);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model, rc.task, rc.train);
        }
        py::list metrics;
        for (const auto& row : r.metrics) {
          py::dict d;
          d["step"] = row.step;
          d["loss"] = row.loss;
          d["token_acc"] = row.token_acc;
          d["lr"] = row.lr;
          d["grad_norm"] = row.grad_norm;
          metrics.append(d);
        }
        return py::make_tuple(std::move(model), metrics);
      },
      py::arg("config"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
