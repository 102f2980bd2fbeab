// dgflow: generate datasets, train energy or vector-field models, predict,
// evaluate and report table rows. Exit codes: 0 success, 1 runtime or
// numerical failure, 2 usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dgflow/errors.hpp"
#include "dgflow/generate.hpp"
#include "dgflow/parallel.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace dgflow;
using namespace dgflow::cli;

namespace {

struct GenerateFlags {
  std::string system, out, input;
  std::uint64_t seed = 0;
  std::optional<std::size_t> series, train_series, steps, n_train, n_test, obs, n_long, long_obs;
  std::optional<double> dt, duration, noise, friction;
};

struct TrainFlags {
  std::string model = "dgnet";
  std::string integrator = "rk2";
  std::optional<std::string> arch, activation;
  std::vector<std::size_t> hidden{200, 200};
  std::optional<std::size_t> kernel;
  bool flattened = false;
  std::size_t iterations = 2000;
  double lr = 1e-3;
  std::size_t batch = 200;
  std::uint64_t seed = 0;
  std::string precision = "f64";
  std::size_t micro_batch = 0;
  std::size_t log_every = 100;
  bool learn_friction = false;
  bool no_normalize = false;
};

struct PredictFlags {
  std::optional<std::string> integrator;
  std::optional<std::size_t> steps;
  std::optional<double> dt;
  double tol = 0.0;
  std::string solver = "fixed_point";
  std::size_t max_iter = 100;
};

const std::vector<std::string> kSystems = {"kdv", "ch", "mass_spring", "damped_spring", "pendulum", "twobody",
                                           "real_pendulum"};
const std::vector<std::string> kSplits = {"train", "test", "long_term"};

void add_train_flags(CLI::App* c, TrainFlags& f) {
  c->add_option("--model", f.model, "dgnet, hnn or node")->check(CLI::IsMember({"dgnet", "hnn", "node"}));
  c->add_option("--integrator", f.integrator, "training integrator of hnn/node: euler or rk2")
      ->check(CLI::IsMember({"euler", "rk2"}));
  c->add_option("--arch", f.arch, "mlp, conv, separable, node_mlp or node_conv (default from the dataset)");
  c->add_option("--hidden", f.hidden, "hidden widths, comma separated")->delimiter(',');
  c->add_option("--activation", f.activation, "tanh, sin, cos, identity");
  c->add_option("--kernel", f.kernel, "conv kernel size");
  c->add_flag("--flattened", f.flattened, "conv energy with a global dense layer");
  c->add_option("--iterations", f.iterations);
  c->add_option("--lr", f.lr);
  c->add_option("--batch", f.batch);
  c->add_option("--seed", f.seed);
  c->add_option("--precision", f.precision)->check(CLI::IsMember({"f32", "f64"}));
  c->add_option("--micro-batch", f.micro_batch, "rows per tape (0: automatic)");
  c->add_option("--log-every", f.log_every);
  c->add_flag("--learn-friction", f.learn_friction, "learn R in G = S - R, starting at zero");
  c->add_flag("--no-normalize", f.no_normalize, "do not divide integrator residuals by dt");
}

void add_predict_flags(CLI::App* c, PredictFlags& f, const std::string& name) {
  c->add_option(name, f.integrator, "dg, rk2, dopri or leapfrog (default dg; rk2 for node)")
      ->check(CLI::IsMember({"dg", "discrete_gradient", "rk2", "dopri", "leapfrog"}));
  c->add_option("--steps", f.steps, "rollout length (default: reference length - 1)");
  c->add_option("--dt", f.dt, "prediction step (default: dataset dt)");
  c->add_option("--tol", f.tol, "discrete-gradient solver tolerance (0: precision default)");
  c->add_option("--solver", f.solver)->check(CLI::IsMember({"fixed_point", "newton"}));
  c->add_option("--max-iter", f.max_iter);
}

Dataset read_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("dataset directory '" + dir + "' does not exist");
  return load_dataset(dir);
}

Checkpoint read_checkpoint(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("checkpoint '" + path + "' does not exist");
  return load_checkpoint(path);
}

std::pair<ArchSpec, TrainConfig> train_setup(const Dataset& ds, const TrainFlags& f) {
  TrainConfig cfg;
  cfg.role = role_from_string(f.model);
  cfg.integrator = train_integrator_from_string(f.integrator);
  cfg.lr = f.lr;
  cfg.batch = f.batch;
  cfg.iterations = f.iterations;
  cfg.seed = f.seed;
  cfg.precision = precision_from_string(f.precision);
  cfg.micro_batch = f.micro_batch;
  cfg.log_every = f.log_every;
  cfg.learn_friction = f.learn_friction;
  cfg.normalize_by_dt = !f.no_normalize;
  cfg.validate();
  ArchSpec a = default_arch(ds, cfg.role);
  if (f.arch) a.kind = arch_from_string(*f.arch);
  if (f.activation) a.activation = activation_from_string(*f.activation);
  if (f.kernel) a.kernel = *f.kernel;
  a.hidden = f.hidden;
  a.flattened = f.flattened;
  return {a, cfg};
}

PredictOptions predict_setup(const LoadedModel* m, const Dataset& ds, const PredictFlags& f, bool deterministic) {
  PredictOptions o;
  const bool node = m && m->node;
  o.kind = stepper_from_string(f.integrator.value_or(node ? "rk2" : "dg"));
  o.steps = f.steps;
  o.dt = f.dt.value_or(ds.dt);
  o.dg.tol = f.tol;
  o.dg.solver = f.solver == "newton" ? DgSolver::newton_fd : DgSolver::fixed_point;
  o.dg.max_iter = f.max_iter;
  if (m) o.dg.precision = m->ck.precision;
  o.deterministic = deterministic;
  return o;
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

int cmd_generate(const GenerateFlags& f, bool deterministic) {
  Dataset ds;
  if (f.system == "kdv") {
    KdvGenConfig c;
    c.seed = f.seed;
    c.deterministic = deterministic;
    if (f.series) c.n_series = *f.series;
    if (f.train_series) c.n_train = *f.train_series;
    if (f.steps) c.steps = *f.steps;
    if (f.dt) c.dt = *f.dt;
    ds = gen_kdv(c);
  } else if (f.system == "ch") {
    ChGenConfig c;
    c.seed = f.seed;
    c.deterministic = deterministic;
    if (f.series) c.n_series = *f.series;
    if (f.train_series) c.n_train = *f.train_series;
    if (f.steps) c.steps = *f.steps;
    if (f.dt) c.dt = *f.dt;
    ds = gen_ch(c);
  } else if (f.system == "real_pendulum") {
    if (f.input.empty()) throw UsageError("real_pendulum needs --input <file>");
    if (!fs::is_regular_file(f.input)) throw UsageError("input file '" + f.input + "' does not exist");
    ds = load_real_pendulum(f.input);
  } else {
    OdeGenConfig c = OdeGenConfig::defaults(f.system);
    c.seed = f.seed;
    c.deterministic = deterministic;
    if (f.n_train) c.n_train = *f.n_train;
    if (f.n_test) c.n_test = *f.n_test;
    if (f.obs) c.obs = *f.obs;
    if (f.n_long) c.n_long = *f.n_long;
    if (f.long_obs) c.long_obs = *f.long_obs;
    if (f.duration) c.long_duration = *f.duration;
    if (f.noise) c.noise = *f.noise;
    if (f.friction) c.friction = *f.friction;
    ds = gen_ode(c);
  }
  save_dataset(f.out, ds);
  std::cout << "generated " << ds.system << " in " << f.out << ": train " << ds.train.size() << ", test "
            << ds.test.size() << ", long_term " << ds.long_term.size() << " trajectories, dt " << ds.dt;
  for (const std::string& s : kSplits) {
    const auto& split = ds.split(s);
    if (split.empty()) continue;
    const auto blob = encode_split(split, ds.precision);
    std::cout << ", " << s << " crc32 " << hex32(crc32_bytes(blob.data(), blob.size()));
  }
  std::cout << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& out, std::string log_path, const TrainFlags& f) {
  const Dataset ds = read_dataset(data);
  const auto [arch, cfg] = train_setup(ds, f);
  TrainResult r;
  const Checkpoint ck = train_model(ds, arch, cfg, &r);
  save_checkpoint(out, ck);
  if (log_path.empty()) log_path = out + ".loss.csv";
  std::ofstream log(log_path);
  log << "iteration,loss,seconds\n";
  log.precision(17);
  for (const auto& e : r.log) log << e.iteration << ',' << e.loss << ',' << e.seconds << "\n";
  std::cout << "trained " << ck.model << " (" << to_string(arch.kind) << ", " << ck.params.count() << " parameters) for "
            << cfg.iterations << " iterations in " << r.seconds << " s";
  if (!r.log.empty()) std::cout << ", final loss " << r.log.back().loss;
  if (r.friction) std::cout << ", friction " << r.friction->values()[0];
  std::cout << "\ncheckpoint " << out << ", loss log " << log_path << "\n";
  return 0;
}

void write_predictions(const std::string& out, const Dataset& ds, const std::string& split, const LoadedModel& m,
                       const PredictOptions& o, const Prediction& p) {
  Dataset pd;
  pd.system = ds.system;
  pd.params = ds.params;
  pd.seed = ds.seed;
  pd.dt = o.dt;
  pd.dx = ds.dx;
  pd.precision = ds.precision;
  (split == "train" ? pd.train : split == "long_term" ? pd.long_term : pd.test) = p.trajectories;
  pd.notes["model"] = m.ck.model;
  pd.notes["train_integrator"] = m.train_integrator();
  pd.notes["predict_integrator"] = to_string(o.kind);
  pd.notes["source_split"] = split;
  save_dataset(out, pd);

  std::ofstream diag(fs::path(out) / "diagnostics.csv");
  diag << "trajectory,step,iterations,residual,rejected,newton\n";
  diag.precision(17);
  for (std::size_t j = 0; j < p.diagnostics.size(); ++j)
    for (std::size_t k = 0; k < p.diagnostics[j].size(); ++k) {
      const auto& d = p.diagnostics[j][k];
      diag << j << ',' << k + 1 << ',' << d.iterations << ',' << d.residual << ',' << d.rejected << ','
           << (d.newton ? 1 : 0) << "\n";
    }
  if (!m.energy) return;
  std::ofstream h(fs::path(out) / "learned_energy.csv");
  h << "trajectory,step,t,H_learned,dH_step\n";
  h.precision(17);
  for (std::size_t j = 0; j < p.trajectories.size(); ++j) {
    const auto& tr = p.trajectories[j];
    const Tensor e = energy_values(*m.energy, tr.states);
    for (std::size_t k = 0; k < tr.length(); ++k)
      h << j << ',' << k << ',' << tr.times[k] << ',' << e[k] << ',' << (k ? e[k] - e[k - 1] : 0.0) << "\n";
  }
}

int cmd_predict(const std::string& ckpt, const std::string& data, const std::string& out, const std::string& split,
                const PredictFlags& f, bool deterministic) {
  const Dataset ds = read_dataset(data);
  const LoadedModel m = load_model(read_checkpoint(ckpt), ds);
  const auto& source = ds.split(split);
  if (source.empty()) throw UsageError("split '" + split + "' is empty");
  const PredictOptions o = predict_setup(&m, ds, f, deterministic);
  const Prediction p = predict(m, source, o);
  if (!p.ok()) {
    for (std::size_t j = 0; j < p.errors.size(); ++j)
      if (!p.errors[j].empty()) std::cerr << "trajectory " << j << ": " << p.errors[j] << "\n";
    return 1;
  }
  write_predictions(out, ds, split, m, o, p);
  std::size_t newton = 0, iters = 0, steps = 0;
  double worst = 0.0;
  for (const auto& d : p.diagnostics)
    for (const auto& s : d) {
      newton += s.newton ? 1 : 0;
      iters += s.iterations;
      worst = std::max(worst, s.residual);
      ++steps;
    }
  std::cout << "predicted " << p.trajectories.size() << " trajectories with " << to_string(o.kind) << " into " << out;
  if (steps) std::cout << ", mean solver iterations " << double(iters) / double(steps) << ", max residual " << worst
                       << ", newton steps " << newton;
  std::cout << "\n";
  return 0;
}

std::string default_eval_split(const Dataset& pred) {
  std::string found;
  for (const std::string& s : kSplits) {
    if (pred.split(s).empty()) continue;
    if (!found.empty()) return "test";
    found = s;
  }
  return found.empty() ? "test" : found;
}

void write_outputs(const MetricsReport& r, const std::vector<EnergySeries>* series, const std::string& csv_dir,
                   const std::string& json_path, const std::string& table_path) {
  if (series && !csv_dir.empty()) {
    fs::create_directories(csv_dir);
    for (std::size_t j = 0; j < series->size(); ++j) {
      std::ofstream os(fs::path(csv_dir) / ("trajectory_" + std::to_string(j) + ".csv"));
      write_metrics_csv(os, (*series)[j]);
    }
  }
  if (!json_path.empty()) std::ofstream(json_path) << r.to_json() << "\n";
  if (!table_path.empty()) std::ofstream(table_path) << report_table_header() << "\n" << report_table_row(r) << "\n";
  std::cout << report_table_header() << "\n" << report_table_row(r) << "\n";
}

struct EvalFlags {
  std::string data, pred, checkpoint, csv_dir, json, table;
  std::optional<std::string> split;
};

int cmd_evaluate(const EvalFlags& e, const PredictFlags& f, bool deterministic) {
  const Dataset ds = read_dataset(e.data);
  const Dataset pd = read_dataset(e.pred);
  const std::string split = e.split.value_or(default_eval_split(pd));
  std::optional<LoadedModel> m;
  if (!e.checkpoint.empty()) m = load_model(read_checkpoint(e.checkpoint), ds);
  PredictFlags pf = f;
  if (!pf.integrator) {
    const auto it = pd.notes.find("predict_integrator");
    if (it != pd.notes.end()) pf.integrator = it->second;
  }
  EvalInput in;
  in.data = &ds;
  in.truth = &ds.split(split);
  in.pred = &pd.split(split);
  in.model = m ? &*m : nullptr;
  in.predict = predict_setup(in.model, ds, pf, deterministic);
  in.predict_name = pf.integrator ? to_string(stepper_from_string(*pf.integrator)) : "NA";
  std::vector<EnergySeries> series;
  const MetricsReport r = evaluate(in, &series);
  write_outputs(r, &series, e.csv_dir, e.json, e.table);
  return 0;
}

struct ReportFlags {
  std::string data, out, json;
  std::optional<std::string> split;
  std::size_t trials = 1;
};

int cmd_report(const ReportFlags& rf, const TrainFlags& tf, const PredictFlags& pf, bool deterministic) {
  if (rf.trials == 0) throw UsageError("--trials must be at least 1");
  const Dataset ds = read_dataset(rf.data);
  const std::string split = rf.split.value_or(ds.long_term.empty() ? "test" : "long_term");
  const auto& source = ds.split(split);
  if (source.empty()) throw UsageError("split '" + split + "' is empty");
  std::vector<MetricsReport> reports;
  for (std::size_t k = 0; k < rf.trials; ++k) {
    TrainFlags t = tf;
    t.seed = tf.seed + k;
    const auto [arch, cfg] = train_setup(ds, t);
    const LoadedModel m = load_model(train_model(ds, arch, cfg, nullptr), ds);
    const PredictOptions o = predict_setup(&m, ds, pf, deterministic);
    const Prediction p = predict(m, source, o);
    if (!p.ok()) {
      for (std::size_t j = 0; j < p.errors.size(); ++j)
        if (!p.errors[j].empty()) std::cerr << "trial " << k << ", trajectory " << j << ": " << p.errors[j] << "\n";
      return 1;
    }
    EvalInput in;
    in.data = &ds;
    in.truth = &source;
    in.pred = &p.trajectories;
    in.model = &m;
    in.predict = o;
    in.predict_name = to_string(o.kind);
    reports.push_back(evaluate(in));
    if (rf.trials > 1) std::cerr << "trial " << k << ": " << report_table_row(reports.back()) << "\n";
  }
  write_outputs(average(reports), nullptr, "", rf.json, rf.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgflow: discrete-gradient energy models for physical time series"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file of option values; command-line flags take precedence");
  bool deterministic = false;
  std::size_t threads = 0;
  app.add_flag("--deterministic", deterministic, "single-threaded, bit-reproducible execution");
  app.add_option("--threads", threads, "worker threads (0: all cores)");

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "generate a dataset directory");
  g->add_option("--system", gen.system)->required()->check(CLI::IsMember(kSystems));
  g->add_option("--out", gen.out, "dataset directory")->required();
  g->add_option("--seed", gen.seed);
  g->add_option("--input", gen.input, "real pendulum text file (time, q, p)");
  g->add_option("--series", gen.series, "PDE: number of series");
  g->add_option("--train-series", gen.train_series, "PDE: series in the train split");
  g->add_option("--steps", gen.steps, "PDE: steps per series");
  g->add_option("--dt", gen.dt, "PDE: time step");
  g->add_option("--n-train", gen.n_train, "ODE: train trajectories");
  g->add_option("--n-test", gen.n_test, "ODE: test trajectories");
  g->add_option("--obs", gen.obs, "ODE: samples per train/test trajectory");
  g->add_option("--n-long", gen.n_long, "ODE: long-term trajectories");
  g->add_option("--long-obs", gen.long_obs, "ODE: samples per long-term trajectory");
  g->add_option("--duration", gen.duration, "ODE: long-term duration");
  g->add_option("--noise", gen.noise, "ODE: observation noise sigma");
  g->add_option("--friction", gen.friction, "ODE: friction of damped systems");

  std::string data, out, log_path, ckpt, split = "test";
  TrainFlags tf;
  auto* t = app.add_subcommand("train", "train a model on a dataset");
  t->add_option("--data", data)->required();
  t->add_option("--out", out, "checkpoint file")->required();
  t->add_option("--log", log_path, "loss log CSV (default <out>.loss.csv)");
  add_train_flags(t, tf);

  PredictFlags pf;
  auto* p = app.add_subcommand("predict", "roll out a trained model from every initial state of a split");
  p->add_option("--checkpoint", ckpt)->required();
  p->add_option("--data", data)->required();
  p->add_option("--out", out, "prediction directory")->required();
  p->add_option("--split", split)->check(CLI::IsMember(kSplits));
  add_predict_flags(p, pf, "--integrator");

  EvalFlags ef;
  auto* e = app.add_subcommand("evaluate", "metrics of predictions against a dataset");
  e->add_option("--data", ef.data)->required();
  e->add_option("--pred", ef.pred, "prediction directory")->required();
  e->add_option("--checkpoint", ef.checkpoint, "model, for deriv/diff metrics and the learned energy");
  e->add_option("--split", ef.split)->check(CLI::IsMember(kSplits));
  e->add_option("--csv-dir", ef.csv_dir, "per-trajectory energy/mass CSV files");
  e->add_option("--json", ef.json, "full report as JSON");
  e->add_option("--table", ef.table, "table header and row as CSV");
  add_predict_flags(e, pf, "--integrator");

  ReportFlags rf;
  TrainFlags rtf;
  auto* r = app.add_subcommand("report", "train, predict and evaluate: one table row");
  r->add_option("--data", rf.data)->required();
  r->add_option("--out", rf.out, "table CSV");
  r->add_option("--json", rf.json, "averaged report as JSON");
  r->add_option("--split", rf.split, "split to predict (default long_term, else test)")->check(CLI::IsMember(kSplits));
  r->add_option("--trials", rf.trials, "independent seeds averaged into the row");
  add_train_flags(r, rtf);
  r->remove_option(r->get_option("--integrator"));
  r->add_option("--train-integrator", rtf.integrator)->check(CLI::IsMember({"euler", "rk2"}));
  add_predict_flags(r, pf, "--predict-integrator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    set_thread_count(deterministic ? 1 : threads);
    if (g->parsed()) return cmd_generate(gen, deterministic);
    if (t->parsed()) return cmd_train(data, out, log_path, tf);
    if (p->parsed()) return cmd_predict(ckpt, data, out, split, pf, deterministic);
    if (e->parsed()) return cmd_evaluate(ef, pf, deterministic);
    if (r->parsed()) return cmd_report(rf, rtf, pf, deterministic);
  } catch (const std::invalid_argument& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
