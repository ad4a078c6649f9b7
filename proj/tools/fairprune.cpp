// Copyright 2026 The FAIR-Pruner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fairprune: train, capture, score, plan, prune and evaluate dense nets.
// Every successful command prints one JSON line to stdout.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fair/fair.hpp"

namespace fs = std::filesystem;
using fair::ErrorKind;
using nlohmann::json;

namespace {

struct Options {
  std::string dumps, report, plan, checkpoint, pruned, dataset, synthetic, out, csv;
  std::vector<double> tod{0.1};
  std::vector<double> rates;
  std::vector<std::size_t> hidden{64, 32}, sizes{64, 256, 1024};
  std::vector<std::string> methods{"fair", "random_tod", "random_uniform", "l1"};
  std::uint64_t seed = 0;
  std::size_t projections = 32;
  std::size_t epochs = 30;
  std::size_t ft_epochs = 10;
  double lr = 0.05;
  std::size_t batch = 32;
  std::size_t trials = 5;
  std::size_t rounds = 1;
  std::size_t resamples = 20;
  std::uint32_t layer = 0;
  bool deterministic = false;
  bool abs_errors = false;
};

class UsageError : public fair::Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::invalid_input, what) {}
};

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void emit(const json& summary) { std::cout << summary.dump() << std::endl; }

fair::diagnostics::DiagnosticsConfig diag_config(const Options& o) {
  if (o.projections == 0) throw UsageError("--projections must be positive");
  fair::diagnostics::DiagnosticsConfig cfg;
  cfg.sliced = {o.projections, fair::stream_seed(o.seed, "projections")};
  cfg.absolute_errors = o.abs_errors;
  return cfg;
}

// K,p,sep,n -> n train, round(0.32 n) prune, n test samples.
fair::mininet::Splits load_data(const Options& o) {
  if (!o.dataset.empty() && !o.synthetic.empty())
    throw UsageError("--dataset and --synthetic are mutually exclusive");
  if (!o.dataset.empty()) return fair::mininet::load_csv(o.dataset);
  if (o.synthetic.empty()) throw UsageError("one of --dataset or --synthetic is required");
  std::vector<std::string> parts;
  std::stringstream ss(o.synthetic);
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 4) throw UsageError("--synthetic expects K,p,sep,n");
  fair::mininet::BlobSpec spec;
  std::size_t n = 0;
  try {
    spec.classes = std::stoul(parts[0]);
    spec.dim = std::stoul(parts[1]);
    spec.separation = std::stod(parts[2]);
    n = std::stoul(parts[3]);
  } catch (const std::logic_error&) {
    throw UsageError("--synthetic expects K,p,sep,n, got '" + o.synthetic + "'");
  }
  if (n < 2 * spec.classes || !(spec.separation >= 0.0))
    throw UsageError("--synthetic needs n >= 2K and sep >= 0");
  spec.seed = fair::stream_seed(o.seed, "data");
  const auto n_prune = static_cast<std::size_t>(std::llround(0.32 * static_cast<double>(n)));
  return fair::mininet::make_blob_splits(spec, n, std::max(n_prune, 2 * spec.classes), n);
}

fair::mininet::MiniNet load_net(const Options& o) {
  need(o.checkpoint, "--checkpoint");
  return fair::mininet::load_checkpoint(o.checkpoint);
}

// Model shape for planning: the checkpoint if given, else the report's metadata.
fair::planner::ModelShape plan_shape(const Options& o, const fair::diagnostics::ScoreReport& r) {
  if (!o.checkpoint.empty()) return fair::mininet::load_checkpoint(o.checkpoint).shape();
  if (auto s = fair::pipeline::report_shape(r)) return *s;
  throw fair::Error(ErrorKind::invalid_input,
                    "report carries no layer_sizes; pass --checkpoint to give the model shape");
}

void check_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw UsageError("--tod needs at least one level");
  for (double a : levels)
    if (!(a > 0.0 && a < 1.0))
      throw UsageError("--tod levels must lie in (0, 1), got " + std::to_string(a));
}

std::string level_tag(double a) {
  std::ostringstream os;
  os << a;
  return os.str();
}

json metrics_json(const fair::mininet::MiniNet& net, const fair::mininet::Dataset& test) {
  const auto m = fair::mininet::evaluate(net, test);
  return {{"accuracy", m.accuracy}, {"loss", m.mean_loss},
          {"params", fair::surgery::count_params(net)}, {"sizes", net.sizes()}};
}

int cmd_train(const Options& o) {
  need(o.checkpoint, "--checkpoint");
  const auto data = load_data(o);
  std::vector<std::size_t> sizes{data.train.features};
  sizes.insert(sizes.end(), o.hidden.begin(), o.hidden.end());
  sizes.push_back(std::max(data.train.classes(), data.test.classes()));
  auto init = fair::mininet::init(sizes, fair::stream_seed(o.seed, "init"));
  const auto result = fair::mininet::train(std::move(init), data.train,
                                           {o.epochs, o.lr, o.batch, fair::stream_seed(o.seed, "batch")});
  fair::mininet::save_checkpoint(o.checkpoint, result.net);
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
      out << e + 1 << ',' << result.loss_trace[e] << '\n';
  }
  emit({{"command", "train"},
        {"checkpoint", o.checkpoint},
        {"epochs", o.epochs},
        {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
        {"train", metrics_json(result.net, data.train)},
        {"test", metrics_json(result.net, data.test)}});
  return 0;
}

int cmd_capture(const Options& o) {
  need(o.dumps, "--dumps");
  const auto net = load_net(o);
  const auto data = load_data(o);
  const auto cap = fair::mininet::capture(net, data.prune);
  fair::pipeline::write_capture(o.dumps, cap, net.shape());
  emit({{"command", "capture"},
        {"dumps", o.dumps},
        {"layers", cap.layers.size()},
        {"samples", data.prune.size()},
        {"loss_sum", cap.loss_sum}});
  return 0;
}

int cmd_score(const Options& o) {
  need(o.dumps, "--dumps");
  need(o.report, "--report");
  const auto report = fair::pipeline::score_directory(o.dumps, diag_config(o), o.deterministic);
  fair::pipeline::write_json(o.report, fair::diagnostics::to_json(report));
  json units = json::array();
  for (const auto& l : report.layers) units.push_back(l.units());
  emit({{"command", "score"}, {"report", o.report}, {"layers", report.layers.size()},
        {"units", units}});
  return 0;
}

fair::diagnostics::ScoreReport load_report(const Options& o) {
  need(o.report, "--report");
  return fair::diagnostics::report_from_json(fair::pipeline::read_json(o.report));
}

json plan_summary(const fair::planner::PruningPlan& p) {
  json removed = json::array();
  for (const auto& l : p.layers) removed.push_back(l.remove.size());
  return {{"tod_level", p.tod_level ? json(*p.tod_level) : json()},
          {"pruning_rate", p.pruning_rate},
          {"removed", removed}};
}

int cmd_plan(const Options& o) {
  need(o.plan, "--plan");
  check_levels(o.tod);
  if (o.tod.size() != 1) throw UsageError("plan takes one --tod level; use sweep for several");
  const auto report = load_report(o);
  const auto plan = fair::planner::build_plan(report, o.tod[0], plan_shape(o, report));
  fair::pipeline::write_json(o.plan, fair::planner::to_json(plan));
  auto summary = plan_summary(plan);
  summary["command"] = "plan";
  summary["plan"] = o.plan;
  emit(summary);
  return 0;
}

int cmd_sweep(const Options& o) {
  need(o.out, "--out");
  check_levels(o.tod);
  const auto report = load_report(o);
  const auto plans = fair::planner::sweep(report, o.tod, plan_shape(o, report));
  fs::create_directories(o.out);
  json files = json::array();
  for (const auto& p : plans) {
    const auto path = fs::path(o.out) / ("plan_tod" + level_tag(*p.tod_level) + ".json");
    fair::pipeline::write_json(path, fair::planner::to_json(p));
    auto s = plan_summary(p);
    s["plan"] = path.string();
    files.push_back(s);
  }
  emit({{"command", "sweep"}, {"plans", files}});
  return 0;
}

int cmd_apply(const Options& o) {
  need(o.plan, "--plan");
  need(o.out, "--out");
  const auto net = load_net(o);
  const auto plan = fair::planner::plan_from_json(fair::pipeline::read_json(o.plan));
  const auto result = fair::surgery::apply(net, plan);
  fair::mininet::save_checkpoint(o.out, result.net);
  auto summary = fair::surgery::to_json(result.report);
  summary["command"] = "apply";
  summary["checkpoint"] = o.out;
  summary["sizes"] = result.net.sizes();
  emit(summary);
  return 0;
}

int cmd_eval(const Options& o) {
  const auto net = load_net(o);
  const auto data = load_data(o);
  json summary = {{"command", "eval"}, {"dense", metrics_json(net, data.test)}};
  if (!o.pruned.empty()) {
    const auto pruned = fair::mininet::load_checkpoint(o.pruned);
    summary["pruned"] = metrics_json(pruned, data.test);
    summary["pruning_rate"] =
        1.0 - static_cast<double>(fair::surgery::count_params(pruned)) /
                  static_cast<double>(fair::surgery::count_params(net));
  }
  emit(summary);
  return 0;
}

int cmd_compare(const Options& o) {
  check_levels(o.tod);
  if (o.trials == 0) throw UsageError("--trials must be >= 1");
  const auto net = load_net(o);
  const auto data = load_data(o);
  const auto report = o.report.empty()
                          ? fair::pipeline::score_net(net, data.prune, diag_config(o))
                          : load_report(o);
  std::vector<fair::baselines::BaselineSpec> specs;
  const auto base_seed = fair::stream_seed(o.seed, "baselines");
  for (const auto& name : o.methods) {
    const auto method = fair::baselines::parse_method(name);
    using fair::baselines::Method;
    if (method == Method::fair || method == Method::random_tod) {
      for (double a : o.tod) specs.push_back({method, a, base_seed});
    } else if (!o.rates.empty()) {
      for (double r : o.rates) specs.push_back({method, r, base_seed});
    } else {
      // Uniform arms default to the rate whose PR is closest to FAIR's.
      for (double a : o.tod) {
        const auto fair_pr = fair::planner::build_plan(report, a, net.shape()).pruning_rate;
        specs.push_back({method, fair::baselines::match_uniform_rate(net.shape(), fair_pr),
                         base_seed});
      }
    }
  }
  fair::baselines::ComparisonSetup setup;
  setup.net = &net;
  setup.train = &data.train;
  setup.test = &data.test;
  setup.report = &report;
  setup.ft_epochs = o.ft_epochs;
  setup.lr = o.lr;
  setup.batch_size = o.batch;
  setup.seed = fair::stream_seed(o.seed, "finetune");
  const auto rows = fair::baselines::run_comparison(setup, specs, o.trials);
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw fair::Error(ErrorKind::invalid_input, "cannot write " + o.csv);
    fair::baselines::write_csv(out, rows);
  }
  json summary = json::array();
  for (const auto& s : fair::baselines::summarize(rows)) {
    auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
    summary.push_back({{"method", s.method},      {"level", s.level},
                       {"pruning_rate", num(s.pruning_rate)},
                       {"os_mean", num(s.os_mean)}, {"os_sd", num(s.os_sd)},
                       {"ft_mean", num(s.ft_mean)}, {"ft_sd", num(s.ft_sd)},
                       {"trials", s.trials}});
  }
  emit({{"command", "compare"},
        {"dense_accuracy", fair::mininet::evaluate(net, data.test).accuracy},
        {"summary", summary}});
  return 0;
}

int cmd_converge(const Options& o) {
  fair::convergence::ConvergenceConfig cfg;
  cfg.sizes = o.sizes;
  cfg.resamples = o.resamples;
  cfg.seed = fair::stream_seed(o.seed, "resample");
  cfg.sliced = diag_config(o).sliced;
  fair::convergence::ConvergenceReport rep;
  if (!o.dumps.empty()) {
    const auto acts = fair::dumpio::read_dump(
        fair::pipeline::dump_path(o.dumps, o.layer, fair::dumpio::DumpKind::activations));
    rep = fair::convergence::run_convergence(acts, cfg);
  } else {
    const auto net = load_net(o);
    const auto data = load_data(o);
    rep = fair::convergence::run_convergence(net, data.prune, o.layer, cfg);
  }
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw fair::Error(ErrorKind::invalid_input, "cannot write " + o.csv);
    fair::convergence::write_csv(out, rep);
  }
  json sizes = json::array();
  for (const auto& s : rep.sizes) {
    double sd = 0.0;
    for (const auto& u : s.units) sd += u.sd;
    sizes.push_back({{"n", s.n},
                     {"mean_sd", s.units.empty() ? 0.0 : sd / static_cast<double>(s.units.size())},
                     {"mean_seconds", s.mean_seconds}});
  }
  emit({{"command", "converge"}, {"layer", o.layer}, {"resamples", o.resamples}, {"sizes", sizes}});
  return 0;
}

int cmd_iterate(const Options& o) {
  check_levels(o.tod);
  need(o.out, "--out");
  if (o.rounds == 0) throw UsageError("--rounds must be >= 1");
  const auto net = load_net(o);
  const auto data = load_data(o);
  fair::pipeline::IterateConfig cfg;
  cfg.alpha = o.tod[0];
  cfg.rounds = o.rounds;
  cfg.ft_epochs = o.ft_epochs;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  cfg.seed = fair::stream_seed(o.seed, "finetune");
  cfg.diagnostics = diag_config(o);
  const auto result = fair::pipeline::iterate(net, data, cfg);
  fair::mininet::save_checkpoint(o.out, result.net);
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw fair::Error(ErrorKind::invalid_input, "cannot write " + o.csv);
    out.precision(17);
    out << "round,params,cumulative_pr,os_acc,ft_acc\n";
    for (const auto& r : result.rounds)
      out << r.round << ',' << r.params << ',' << r.cumulative_pr << ',' << r.os_acc << ','
          << r.ft_acc << '\n';
  }
  json rounds = json::array();
  for (const auto& r : result.rounds)
    rounds.push_back({{"round", r.round},
                      {"removed", r.removed},
                      {"params", r.params},
                      {"cumulative_pr", r.cumulative_pr},
                      {"os_acc", r.os_acc},
                      {"ft_acc", r.ft_acc}});
  emit({{"command", "iterate"},
        {"checkpoint", o.out},
        {"status", result.converged ? "converged" : "completed"},
        {"rounds", rounds},
        {"dense_accuracy", fair::mininet::evaluate(net, data.test).accuracy},
        {"final_accuracy", fair::mininet::evaluate(result.net, data.test).accuracy}});
  return 0;
}

void data_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "CSV with a 'label' column and optional 'split' column");
  cmd->add_option("--synthetic", o.synthetic, "Gaussian blobs K,p,sep,n");
}

void diag_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--projections", o.projections, "sliced-Wasserstein projections")
      ->capture_default_str();
  cmd->add_flag("--abs-errors", o.abs_errors, "score |e_j| instead of signed errors");
}

void train_flags(CLI::App* cmd, Options& o, std::size_t& epochs, const char* help) {
  cmd->add_option("--epochs", epochs, help)->capture_default_str();
  cmd->add_option("--lr", o.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--batch", o.batch, "minibatch size")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FAIR pruning for dense ReLU networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "master seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a dense MLP and save a checkpoint");
  data_flags(train, o);
  train_flags(train, o, o.epochs, "training epochs");
  train->add_option("--hidden", o.hidden, "hidden layer widths")->delimiter(',');
  train->add_option("--checkpoint", o.checkpoint, "output checkpoint");
  train->add_option("--csv", o.csv, "per-epoch loss CSV");

  auto* capture = app.add_subcommand("capture", "write per-layer dumps for the pruning split");
  data_flags(capture, o);
  capture->add_option("--checkpoint", o.checkpoint, "input checkpoint");
  capture->add_option("--dumps", o.dumps, "output dump directory");

  auto* score = app.add_subcommand("score", "score every layer of a dump directory");
  score->add_option("--dumps", o.dumps, "dump directory");
  score->add_option("--report", o.report, "output score report");
  score->add_flag("--deterministic", o.deterministic, "omit the timestamp");
  diag_flags(score, o);

  auto* plan = app.add_subcommand("plan", "derive a pruning plan from a score report");
  plan->add_option("--report", o.report, "score report");
  plan->add_option("--tod", o.tod, "ToD level in (0, 1)")->delimiter(',');
  plan->add_option("--plan", o.plan, "output plan");
  plan->add_option("--checkpoint", o.checkpoint, "model giving the layer shape");

  auto* sweep = app.add_subcommand("sweep", "plans for several ToD levels from one report");
  sweep->add_option("--report", o.report, "score report");
  sweep->add_option("--tod", o.tod, "comma-separated ToD levels")->delimiter(',');
  sweep->add_option("--out", o.out, "output directory");
  sweep->add_option("--checkpoint", o.checkpoint, "model giving the layer shape");

  auto* apply = app.add_subcommand("apply", "remove the planned units from a checkpoint");
  apply->add_option("--checkpoint", o.checkpoint, "input checkpoint");
  apply->add_option("--plan", o.plan, "pruning plan");
  apply->add_option("--out", o.out, "output checkpoint");

  auto* eval = app.add_subcommand("eval", "test accuracy of a checkpoint");
  data_flags(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "dense checkpoint");
  eval->add_option("--pruned", o.pruned, "pruned checkpoint to report alongside");

  auto* compare = app.add_subcommand("compare", "FAIR against baseline pruning methods");
  data_flags(compare, o);
  diag_flags(compare, o);
  train_flags(compare, o, o.ft_epochs, "fine-tuning epochs (0 for one-shot only)");
  compare->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
  compare->add_option("--report", o.report, "score report (scored in memory if absent)");
  compare->add_option("--tod", o.tod, "ToD levels")->delimiter(',');
  compare->add_option("--rates", o.rates, "uniform rates for l1/random_uniform")->delimiter(',');
  compare->add_option("--methods", o.methods, "fair,random_tod,random_uniform,l1,lth")
      ->delimiter(',');
  compare->add_option("--trials", o.trials, "trials per arm")->capture_default_str();
  compare->add_option("--csv", o.csv, "per-trial CSV");

  auto* converge = app.add_subcommand("converge", "utilization estimates against sample size");
  data_flags(converge, o);
  diag_flags(converge, o);
  converge->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
  converge->add_option("--dumps", o.dumps, "dump directory (instead of a checkpoint)");
  converge->add_option("--layer", o.layer, "hidden layer")->capture_default_str();
  converge->add_option("--sizes", o.sizes, "subset sizes")->delimiter(',');
  converge->add_option("--resamples", o.resamples, "resamples per size")->capture_default_str();
  converge->add_option("--csv", o.csv, "per-unit CSV");

  auto* iterate = app.add_subcommand("iterate", "repeated score/prune/fine-tune rounds");
  data_flags(iterate, o);
  diag_flags(iterate, o);
  train_flags(iterate, o, o.ft_epochs, "fine-tuning epochs per round");
  iterate->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
  iterate->add_option("--tod", o.tod, "ToD level")->delimiter(',');
  iterate->add_option("--rounds", o.rounds, "maximum rounds")->capture_default_str();
  iterate->add_option("--out", o.out, "output checkpoint");
  iterate->add_option("--csv", o.csv, "per-round CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (capture->parsed()) return cmd_capture(o);
    if (score->parsed()) return cmd_score(o);
    if (plan->parsed()) return cmd_plan(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (apply->parsed()) return cmd_apply(o);
    if (eval->parsed()) return cmd_eval(o);
    if (compare->parsed()) return cmd_compare(o);
    if (converge->parsed()) return cmd_converge(o);
    if (iterate->parsed()) return cmd_iterate(o);
  } catch (const UsageError& e) {
    std::cerr << "fairprune: usage: " << e.what() << "\nRun with --help for options.\n";
    return 2;
  } catch (const fair::Error& e) {
    std::cerr << "fairprune: error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::invalid_input: return 2;
      case ErrorKind::contract_mismatch: return 3;
      case ErrorKind::internal: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "fairprune: internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
