#include "genius/commands.hpp"
#include "genius/oracle.hpp"
#include "genius/verify.hpp"

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace genius;

namespace {

py::dict metrics_dict(const MetricsRecord& m) {
    py::dict d;
    d["round"] = m.round;
    d["step"] = m.step;
    d["loss"] = m.loss;
    d["mean_w"] = m.mean_w;
    d["mean_z"] = m.mean_z;
    d["accuracy"] = m.accuracy ? py::cast(*m.accuracy) : py::none();
    d["pairs"] = m.pairs;
    d["wall_clock"] = m.wall_clock;
    return d;
}

py::dict table_dict(const LogitTable& t) {
    py::dict d;
    for (const auto& [key, row] : t.rows()) d[py::tuple(py::cast(key))] = row;
    return d;
}

py::dict row_dict(const verify::CheckRow& r) {
    py::dict d;
    d["name"] = r.name;
    d["instances"] = r.instances;
    d["max_error"] = r.max_error;
    d["tolerance"] = r.tolerance;
    d["pass"] = r.pass;
    return d;
}

}  // namespace

PYBIND11_MODULE(_genius, m) {
    m.doc() = "Foresight re-sampling and advantage-calibrated preference optimization on tabular policies";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<RoundError>(m, "RoundError", PyExc_RuntimeError);
    py::register_exception<BudgetError>(m, "BudgetError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Vocab>(m, "Vocab")
        .def(py::init([](int size, Token sep, Token eos) {
                 Vocab v{size, sep, eos};
                 v.validate();
                 return v;
             }),
             py::arg("size"), py::arg("step_sep"), py::arg("eos"))
        .def_readonly("size", &Vocab::size)
        .def_readonly("step_sep", &Vocab::step_sep)
        .def_readonly("eos", &Vocab::eos);

    py::class_<TabularPolicy>(m, "TabularPolicy")
        .def(py::init<Vocab, int>(), py::arg("vocab"), py::arg("order"))
        .def_property_readonly("vocab", &TabularPolicy::vocab)
        .def_property_readonly("order", &TabularPolicy::order)
        .def("set_row", [](TabularPolicy& p, const TokenSeq& key, std::vector<double> row) {
            p.logits().set_row(key, std::move(row));
        })
        .def("rows", [](const TabularPolicy& p) { return table_dict(p.logits()); })
        .def("step_logprobs", &TabularPolicy::step_logprobs)
        .def("greedy_token", &TabularPolicy::greedy_token)
        .def("sequence_logprob", &TabularPolicy::sequence_logprob, py::arg("prefix"), py::arg("continuation"))
        .def("grad_sequence_logprob",
             [](const TabularPolicy& p, const TokenSeq& prefix, const TokenSeq& cont) {
                 return table_dict(p.grad_sequence_logprob(prefix, cont));
             })
        .def("to_text",
             [](const TabularPolicy& p) {
                 std::ostringstream out;
                 write_policy(out, p);
                 return out.str();
             })
        .def_static("from_text",
                    [](const std::string& text) {
                        std::istringstream in(text);
                        return read_policy(in);
                    })
        .def("save", [](const TabularPolicy& p, const std::string& path) { save_policy(path, p); })
        .def_static("load", &load_policy)
        .def(py::self == py::self);

    py::class_<SamplingConfig>(m, "SamplingConfig")
        .def(py::init<>())
        .def_readwrite("beams", &SamplingConfig::beams)
        .def_readwrite("rollouts", &SamplingConfig::rollouts)
        .def_readwrite("timestamps", &SamplingConfig::timestamps)
        .def_readwrite("tau", &SamplingConfig::tau)
        .def_readwrite("gen_temperature", &SamplingConfig::gen_temperature)
        .def_readwrite("max_step_tokens", &SamplingConfig::max_step_tokens)
        .def_readwrite("max_foresight_tokens", &SamplingConfig::max_foresight_tokens)
        .def_property(
            "strategy", [](const SamplingConfig& c) { return to_string(c.strategy); },
            [](SamplingConfig& c, const std::string& s) { c.strategy = parse_strategy(s); })
        .def_property(
            "decoding", [](const SamplingConfig& c) { return to_string(c.decoding); },
            [](SamplingConfig& c, const std::string& s) { c.decoding = parse_decoding(s); });

    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("beta", &LossConfig::beta)
        .def_readwrite("alpha", &LossConfig::alpha)
        .def_readwrite("epsilon", &LossConfig::epsilon)
        .def_readwrite("gamma", &LossConfig::gamma)
        .def_readwrite("eta", &LossConfig::eta)
        .def_property(
            "kind", [](const LossConfig& c) { return to_string(c.kind); },
            [](LossConfig& c, const std::string& s) { c.kind = parse_loss_kind(s); });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("sampling", &TrainConfig::sampling)
        .def_readwrite("loss", &TrainConfig::loss)
        .def_readwrite("rounds", &TrainConfig::rounds)
        .def_readwrite("steps_per_round", &TrainConfig::steps_per_round)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("threads", &TrainConfig::threads);

    py::class_<PreferenceQuintuple>(m, "PreferenceQuintuple")
        .def_readonly("query", &PreferenceQuintuple::query)
        .def_readonly("pos", &PreferenceQuintuple::pos)
        .def_readonly("neg", &PreferenceQuintuple::neg)
        .def_readonly("pos_adv", &PreferenceQuintuple::pos_adv)
        .def_readonly("neg_adv", &PreferenceQuintuple::neg_adv)
        .def_readonly("timestamp", &PreferenceQuintuple::timestamp)
        .def_readonly("pos_fscore", &PreferenceQuintuple::pos_fscore)
        .def_readonly("neg_fscore", &PreferenceQuintuple::neg_fscore)
        .def_property_readonly("strategy", [](const PreferenceQuintuple& q) { return to_string(q.strategy); })
        .def("to_line", &quintuple_to_line)
        .def_static("from_line", &quintuple_from_line)
        .def(py::self == py::self);

    m.def("collect_quintuples", &collect_quintuples, py::arg("policy"), py::arg("query"), py::arg("config"),
          py::arg("stream_root"));
    m.def("build_distribution", &build_distribution, py::arg("fscores"), py::arg("tau") = 1.0);
    m.def("exact_foresight",
          [](const TabularPolicy& p, const TokenSeq& prefix, const TokenSeq& step, int max_tokens) {
              oracle::EnumerationBudget b;
              b.max_tokens = max_tokens;
              return oracle::exact_foresight(p, prefix, step, b);
          },
          py::arg("policy"), py::arg("prefix"), py::arg("step"), py::arg("max_tokens") = 6);

    m.def("calibration_weight", &calibration_weight, py::arg("adv_w"), py::arg("adv_l"), py::arg("alpha") = 1.0);
    m.def("pair_loss",
          [](double lr_w, double lr_l, double adv_w, double adv_l, const LossConfig& cfg) {
              const PairLoss l = pair_loss({lr_w, lr_l, adv_w, adv_l}, cfg);
              py::dict d;
              d["loss"] = l.loss;
              d["z"] = l.z;
              d["w"] = l.w;
              d["dloss_dz"] = l.dloss_dz;
              return d;
          },
          py::arg("lr_w"), py::arg("lr_l"), py::arg("adv_w"), py::arg("adv_l"), py::arg("config"));

    auto t = m.def_submodule("tasks", "Toy query corpora");
    py::class_<tasks::TaskSpec>(t, "TaskSpec")
        .def(py::init([](const std::string& name) {
                 tasks::TaskSpec s;
                 s.name = tasks::parse_task(name);
                 return s;
             }),
             py::arg("name") = "arith_chain")
        .def_property_readonly("name", [](const tasks::TaskSpec& s) { return tasks::to_string(s.name); })
        .def_readwrite("max_operand", &tasks::TaskSpec::max_operand)
        .def_readwrite("num_ops", &tasks::TaskSpec::num_ops)
        .def_readwrite("string_length", &tasks::TaskSpec::string_length)
        .def_readwrite("grid_size", &tasks::TaskSpec::grid_size)
        .def_readwrite("split_seed", &tasks::TaskSpec::split_seed)
        .def("vocab", &tasks::TaskSpec::vocab);
    t.def("render", &tasks::render);
    t.def("parse", &tasks::parse);
    t.def("check", &tasks::check, py::arg("spec"), py::arg("query"), py::arg("response"));
    t.def("gen_queries",
          [](const tasks::TaskSpec& spec, std::size_t n, const std::string& split, std::uint64_t seed) {
              Rng rng(seed);
              const tasks::Split s = split == "train" ? tasks::Split::train
                                     : split == "eval" ? tasks::Split::eval
                                     : split == "pretrain" ? tasks::Split::pretrain
                                                           : throw InputError("unknown split " + split);
              return tasks::gen_queries(spec, n, s, rng);
          },
          py::arg("spec"), py::arg("n"), py::arg("split") = "train", py::arg("seed") = 0);
    t.def("base_policy",
          [](const tasks::TaskSpec& spec, double detour_rate, std::uint64_t seed) {
              tasks::BaseModelOptions o;
              o.detour_rate = detour_rate;
              o.seed = seed;
              return tasks::base_policy(spec, o);
          },
          py::arg("spec"), py::arg("detour_rate") = 0.35, py::arg("seed") = 1);
    t.def("greedy_response", &tasks::greedy_response, py::arg("policy"), py::arg("query"), py::arg("max_tokens") = 12);

    m.def("evaluate", &evaluate, py::arg("policy"), py::arg("spec"), py::arg("queries"),
          py::arg("max_response_tokens") = 12);
    m.def("run_round",
          [](const TabularPolicy& p, const std::vector<TokenSeq>& queries, const TrainConfig& cfg, int round) {
              RoundResult r;
              {
                  py::gil_scoped_release release;
                  r = run_round(p, queries, cfg, round);
              }
              py::list metrics;
              for (const auto& rec : r.metrics) metrics.append(metrics_dict(rec));
              return py::make_tuple(r.policy, metrics, r.dataset);
          },
          py::arg("policy"), py::arg("queries"), py::arg("config"), py::arg("round") = 0);

    m.def("gradcheck",
          [](int instances, std::uint64_t seed) {
              GradcheckOptions o;
              o.instances = instances;
              py::list out;
              for (const auto& r : verify::run_gradcheck(o, seed)) out.append(row_dict(r));
              return out;
          },
          py::arg("instances") = 100, py::arg("seed") = 0);
    m.def("oracle_verify",
          [](int instances, std::uint64_t seed) {
              OracleOptions o;
              o.instances = instances;
              py::list out;
              for (const auto& r : verify::run_oracle_suites(o, seed)) out.append(row_dict(r));
              return out;
          },
          py::arg("instances") = 200, py::arg("seed") = 0);

    m.def("run_command",
          [](const std::string& command, const std::string& config, std::optional<std::uint64_t> seed,
             std::optional<std::string> strategy, std::optional<std::string> loss, std::optional<int> threads,
             std::optional<std::string> out) {
              cli::Overrides ov{seed, strategy, loss, threads, out};
              std::ostringstream o, e;
              int code;
              {
                  py::gil_scoped_release release;
                  code = cli::run_command(command, config, ov, o, e);
              }
              return py::make_tuple(code, o.str(), e.str());
          },
          py::arg("command"), py::arg("config") = "", py::arg("seed") = py::none(), py::arg("strategy") = py::none(),
          py::arg("loss") = py::none(), py::arg("threads") = py::none(), py::arg("out") = py::none());
}
