// Command-line driver: simulate, fit, preprocess, bootstrap, eval.

#include "tdhm/analysis.hpp"
#include "tdhm/inference.hpp"
#include "tdhm/io.hpp"
#include "tdhm/model.hpp"
#include "tdhm/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Accepts a plain number or the symbolic levels log-half-n, log-n, log-2n,
// i.e. log((n-1)/2), log(n-1), log(2(n-1)).
double expand_alpha(const std::string& text, int n) {
  if (text == "log-half-n") return std::log((n - 1) / 2.0);
  if (text == "log-n") return std::log(n - 1.0);
  if (text == "log-2n") return std::log(2.0 * (n - 1));
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("--alpha: expected a number or log-half-n|log-n|log-2n, got '" +
                                text + "'");
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

class ManifestTimer {
 public:
  ManifestTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_manifest(const fs::path& dir, json manifest, const ManifestTimer& timer) {
  manifest["library_version"] = TDHM_VERSION;
  manifest["runtime_seconds"] = timer.seconds();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

json fit_config_json(const tdhm::FitConfig& cfg) {
  return json{{"max_em_iters", cfg.max_em_iters},
              {"em_tol", cfg.em_tol},
              {"mstep_tol", cfg.mstep_tol},
              {"mstep_max_cycles", cfg.mstep_max_cycles},
              {"newton_max_steps", cfg.newton_max_steps},
              {"newton_damping", cfg.newton_damping},
              {"constrain_independent", cfg.constrain_independent},
              {"theta_max", cfg.theta_max},
              {"restart_seeds", cfg.restart_seeds},
              {"restart_sd", cfg.restart_sd}};
}

void write_fit_outputs(const fs::path& dir, const tdhm::FitResult& fit,
                       const tdhm::GroupedData& data) {
  tdhm::io::write_params_file((dir / "params_hat.txt").string(), fit.params);
  tdhm::io::write_matrix_csv((dir / "A_hat.csv").string(), fit.linked.A);
  tdhm::io::write_matrix_csv((dir / "B_hat.csv").string(), fit.linked.B);
  tdhm::io::write_matrix_csv((dir / "C_hat.csv").string(), fit.linked.C);
  tdhm::io::write_matrix_csv((dir / "rho_hat.csv").string(), fit.linked.rho.transpose());
  tdhm::io::write_matrix_csv((dir / "posterior_R.csv").string(), fit.posteriors.R);
  tdhm::io::write_labels_file((dir / "labels.txt").string(), data.node_labels);

  const tdhm::DecodedLeaders decoded = tdhm::decode_leaders(fit, data);
  {
    std::ofstream out(dir / "leaders.csv");
    out << "t,leader,label,new_segment\n";
    std::size_t seg = 0;
    for (int t = 0; t < data.T(); ++t) {
      const bool boundary = seg < decoded.segments.size() && decoded.segments[seg].first == t;
      if (boundary) ++seg;
      out << (t + 1) << "," << (decoded.leaders[t] + 1) << ","
          << data.node_labels[decoded.leaders[t]] << "," << (boundary ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream out(dir / "segments.csv");
    out << "start,end\n";
    for (const auto& [s, e] : decoded.segments) out << (s + 1) << "," << (e + 1) << "\n";
  }
  {
    std::ofstream out(dir / "loglik_trace.csv");
    for (const double ll : fit.loglik_trace) out << tdhm::io::format_g17(ll) << "\n";
  }
}

int cmd_simulate(int n, int T, const std::string& alpha_text, double beta, double gamma,
                 double u_mean, double u_sd, double theta_mean, double theta_sd,
                 std::uint64_t seed, const std::string& out) {
  ManifestTimer timer;
  tdhm::SimConfig cfg;
  cfg.n = n;
  cfg.T = T;
  cfg.alpha = expand_alpha(alpha_text, n);
  cfg.beta = beta;
  cfg.gamma = gamma;
  cfg.u_mean = u_mean;
  cfg.u_sd = u_sd;
  cfg.theta_mean = theta_mean;
  cfg.theta_sd = theta_sd;
  cfg.seed = seed;
  cfg.validate();

  const fs::path dir = prepare_out_dir(out);
  tdhm::Rng rng = tdhm::make_rng(cfg.seed);
  const tdhm::ModelParams params = tdhm::sample_parameters(cfg, rng);
  const auto [leaders, data] = tdhm::simulate_trajectory(params, cfg.T, rng);

  tdhm::io::write_params_file((dir / "params_true.txt").string(), params);
  tdhm::io::write_groups_file((dir / "groups.csv").string(), data);
  {
    std::ofstream out_leaders(dir / "leaders_true.csv");
    out_leaders << "t,leader\n";
    for (int t = 0; t < cfg.T; ++t) out_leaders << (t + 1) << "," << (leaders.z[t] + 1) << "\n";
  }
  write_manifest(dir,
                 json{{"command", "simulate"},
                      {"config",
                       {{"n", cfg.n},
                        {"T", cfg.T},
                        {"alpha", cfg.alpha},
                        {"alpha_flag", alpha_text},
                        {"beta", cfg.beta},
                        {"gamma", cfg.gamma},
                        {"u_mean", cfg.u_mean},
                        {"u_sd", cfg.u_sd},
                        {"theta_mean", cfg.theta_mean},
                        {"theta_sd", cfg.theta_sd}}},
                      {"seed", cfg.seed},
                      {"outputs", {"params_true.txt", "groups.csv", "leaders_true.csv"}}},
                 timer);
  return 0;
}

int cmd_fit(const std::string& groups_path, bool independent, bool time_column,
            const std::optional<std::string>& init_params, const tdhm::FitConfig& cfg_in,
            const std::string& out) {
  ManifestTimer timer;
  tdhm::FitConfig cfg = cfg_in;
  cfg.constrain_independent = independent;
  cfg.validate();

  const tdhm::GroupedData data = tdhm::io::read_groups_file(groups_path, time_column);
  const fs::path dir = prepare_out_dir(out);

  tdhm::FitResult fit;
  if (init_params) {
    fit = tdhm::fit_em(data, cfg, tdhm::io::read_params_file(*init_params));
  } else {
    fit = tdhm::fit_em(data, cfg);
  }
  write_fit_outputs(dir, fit, data);

  json manifest{{"command", "fit"},
                {"config", fit_config_json(cfg)},
                {"inputs", {{"groups", groups_path}}},
                {"data", {{"T", data.T()}, {"n", data.n()}}},
                {"result",
                 {{"log_marginal", fit.posteriors.log_marginal},
                  {"iterations", fit.iterations},
                  {"converged", fit.converged}}},
                {"outputs",
                 {"params_hat.txt", "A_hat.csv", "B_hat.csv", "C_hat.csv", "rho_hat.csv",
                  "posterior_R.csv", "labels.txt", "leaders.csv", "segments.csv",
                  "loglik_trace.csv"}}};
  if (init_params) manifest["inputs"]["init_params"] = *init_params;
  write_manifest(dir, manifest, timer);

  std::cout << "log P(G) = " << fit.posteriors.log_marginal << " after " << fit.iterations
            << " EM iterations (" << (fit.converged ? "converged" : "budget exhausted")
            << ")\n";
  return 0;
}

int cmd_preprocess(const std::string& raw_path, const std::string& out) {
  ManifestTimer timer;
  const tdhm::RawRecords raw = tdhm::io::read_raw_records(raw_path);
  tdhm::PreprocessReport report;
  const tdhm::GroupedData data = tdhm::preprocess(raw, &report);

  const fs::path dir = prepare_out_dir(out);
  tdhm::io::write_groups_file((dir / "groups.csv").string(), data);
  {
    std::ofstream rep(dir / "preprocess_report.txt");
    rep << "events " << raw.events.size() << "\n";
    rep << "kept_nodes " << data.n() << "\n";
    rep << "removed_nodes";
    for (const auto& lab : report.removed_labels) rep << " " << lab;
    rep << "\nretained_candidate";
    for (const int k : report.retained_candidate) rep << " " << (k + 1);
    rep << "\n";
  }
  write_manifest(dir,
                 json{{"command", "preprocess"},
                      {"inputs", {{"raw", raw_path}}},
                      {"data", {{"T", data.T()}, {"n", data.n()}}},
                      {"removed_nodes", report.removed_labels},
                      {"outputs", {"groups.csv", "preprocess_report.txt"}}},
                 timer);
  std::cout << "kept " << data.T() << " groups with " << data.n() << " nodes ("
            << report.removed_labels.size() << " removed)\n";
  return 0;
}

int cmd_bootstrap(const std::string& fit_dir, int B, double level, std::uint64_t seed,
                  int jobs, const tdhm::FitConfig& cfg_in, const std::string& out) {
  ManifestTimer timer;
  const fs::path fdir(fit_dir);
  std::ifstream mf(fdir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot open " + (fdir / "manifest.json").string());
  json fit_manifest = json::parse(mf);
  if (fit_manifest.value("command", "") != "fit") {
    throw std::runtime_error("--fit must point at a fit output directory");
  }
  const int T = fit_manifest.at("data").at("T").get<int>();

  tdhm::FitConfig cfg = cfg_in;
  cfg.constrain_independent =
      fit_manifest.at("config").value("constrain_independent", false);
  cfg.validate();

  const tdhm::ModelParams params =
      tdhm::io::read_params_file((fdir / "params_hat.txt").string());
  tdhm::FitResult fit;
  fit.params = params;
  fit.linked = tdhm::link_probabilities(params);

  const tdhm::BootstrapResult bs =
      tdhm::parametric_bootstrap(fit, T, B, level, cfg, seed, jobs);

  const fs::path dir = prepare_out_dir(out);
  {
    std::ofstream reps(dir / "replicates.csv");
    reps << "alpha,beta,gamma\n";
    for (Eigen::Index r = 0; r < bs.estimates.rows(); ++r) {
      reps << tdhm::io::format_g17(bs.estimates(r, 0)) << ","
           << tdhm::io::format_g17(bs.estimates(r, 1)) << ","
           << tdhm::io::format_g17(bs.estimates(r, 2)) << "\n";
    }
  }
  {
    std::ofstream ci(dir / "ci.csv");
    ci << "parameter,lower,point,upper\n";
    const char* names[3] = {"alpha", "beta", "gamma"};
    for (int k = 0; k < 3; ++k) {
      ci << names[k] << "," << tdhm::io::format_g17(bs.ci_lower[k]) << ","
         << tdhm::io::format_g17(bs.point[k]) << "," << tdhm::io::format_g17(bs.ci_upper[k])
         << "\n";
    }
  }
  write_manifest(dir,
                 json{{"command", "bootstrap"},
                      {"config",
                       {{"B", B}, {"level", level}, {"jobs", jobs}, {"fit_config", fit_config_json(cfg)}}},
                      {"seed", seed},
                      {"inputs", {{"fit_dir", fit_dir}}},
                      {"data", {{"T", T}}},
                      {"failures", bs.failures},
                      {"outputs", {"replicates.csv", "ci.csv"}}},
                 timer);

  const char* names[3] = {"alpha", "beta", "gamma"};
  for (int k = 0; k < 3; ++k) {
    std::cout << names[k] << ": " << bs.point[k] << "  " << 100 * level << "% CI ["
              << bs.ci_lower[k] << ", " << bs.ci_upper[k] << "]\n";
  }
  if (bs.failures > 0) std::cout << bs.failures << " replicate fits failed\n";
  return 0;
}

int cmd_eval(const std::string& estimated_path, const std::string& true_path,
             const std::optional<std::string>& out) {
  ManifestTimer timer;
  const tdhm::ModelParams est = tdhm::io::read_params_file(estimated_path);
  const tdhm::ModelParams tru = tdhm::io::read_params_file(true_path);
  if (est.n != tru.n) {
    throw std::invalid_argument("eval: network sizes differ (" + std::to_string(est.n) +
                                " vs " + std::to_string(tru.n) + ")");
  }
  const tdhm::Matrix a_est = tdhm::link_probabilities(est).A;
  const tdhm::Matrix a_tru = tdhm::link_probabilities(tru).A;

  std::ostringstream report;
  report << "rmse_A " << tdhm::rmse(a_est, a_tru) << "\n";
  report << "abs_err_alpha " << std::abs(est.alpha - tru.alpha) << "\n";
  report << "abs_err_beta " << std::abs(est.beta - tru.beta) << "\n";
  report << "abs_err_gamma " << std::abs(est.gamma - tru.gamma) << "\n";
  std::cout << report.str();

  if (out) {
    const fs::path dir = prepare_out_dir(*out);
    std::ofstream f(dir / "eval.txt");
    f << report.str();
    write_manifest(dir,
                   json{{"command", "eval"},
                        {"inputs", {{"estimated", estimated_path}, {"true", true_path}}},
                        {"outputs", {"eval.txt"}}},
                   timer);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-dependent hub model: simulation, EM fitting, bootstrap"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Sample parameters and a trajectory");
  int sim_n = 50, sim_T = 1000;
  std::string sim_alpha = "0";
  double sim_beta = 0.0, sim_gamma = 0.0, sim_umean = 0.0,
         sim_usd = 1.4142135623730951, sim_tmean = -2.0, sim_tsd = 1.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--n", sim_n, "network size");
  sim->add_option("--T", sim_T, "number of groups");
  sim->add_option("--alpha", sim_alpha, "number or log-half-n|log-n|log-2n");
  sim->add_option("--beta", sim_beta, "member-stay adjustment");
  sim->add_option("--gamma", sim_gamma, "member-join adjustment");
  sim->add_option("--u-mean", sim_umean, "mean of u draws");
  sim->add_option("--u-sd", sim_usd, "sd of u draws");
  sim->add_option("--theta-mean", sim_tmean, "mean of theta draws");
  sim->add_option("--theta-sd", sim_tsd, "sd of theta draws");
  sim->add_option("--seed", sim_seed, "rng seed");
  sim->add_option("-o,--out", sim_out, "output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the model by EM");
  std::string fit_groups, fit_out, fit_init;
  bool fit_indep = false, fit_timecol = false;
  tdhm::FitConfig fit_cfg;
  std::vector<std::uint64_t> fit_restarts;
  fit->add_option("--groups", fit_groups, "groups csv file")->required();
  fit->add_flag("--independent", fit_indep, "classical hub model (alpha=beta=gamma=0)");
  fit->add_flag("--time-column", fit_timecol, "headerless file has a leading time column");
  fit->add_option("--init-params", fit_init, "warm-start params file");
  fit->add_option("--max-em-iters", fit_cfg.max_em_iters, "EM iteration cap");
  fit->add_option("--em-tol", fit_cfg.em_tol, "log-marginal improvement tolerance");
  fit->add_option("--mstep-tol", fit_cfg.mstep_tol, "M-step Q improvement tolerance");
  fit->add_option("--mstep-max-cycles", fit_cfg.mstep_max_cycles, "coordinate cycles cap");
  fit->add_option("--newton-max-steps", fit_cfg.newton_max_steps, "Newton steps per coordinate");
  fit->add_option("--newton-damping", fit_cfg.newton_damping, "step-halving limit");
  fit->add_option("--restart-seeds", fit_restarts, "seeds for perturbed restarts");
  fit->add_option("--restart-sd", fit_cfg.restart_sd, "restart perturbation sd");
  fit->add_option("-o,--out", fit_out, "output directory")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Resolve multi-candidate records");
  std::string pre_raw, pre_out;
  pre->add_option("--raw", pre_raw, "raw records file")->required();
  pre->add_option("-o,--out", pre_out, "output directory")->required();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "Parametric bootstrap of a fit");
  std::string boot_fit, boot_out;
  int boot_B = 200, boot_jobs = 1;
  double boot_level = 0.95;
  std::uint64_t boot_seed = 0;
  tdhm::FitConfig boot_cfg;
  boot->add_option("--fit", boot_fit, "fit output directory")->required();
  boot->add_option("--B", boot_B, "number of replicates");
  boot->add_option("--level", boot_level, "confidence level");
  boot->add_option("--seed", boot_seed, "rng seed");
  boot->add_option("--jobs", boot_jobs, "concurrent replicate fits");
  boot->add_option("--max-em-iters", boot_cfg.max_em_iters, "EM iteration cap per replicate");
  boot->add_option("--em-tol", boot_cfg.em_tol, "log-marginal improvement tolerance");
  boot->add_option("-o,--out", boot_out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Compare estimated and true parameters");
  std::string ev_est, ev_true, ev_out;
  ev->add_option("--estimated", ev_est, "estimated params file")->required();
  ev->add_option("--true", ev_true, "true params file")->required();
  ev->add_option("-o,--out", ev_out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_n, sim_T, sim_alpha, sim_beta, sim_gamma, sim_umean, sim_usd,
                          sim_tmean, sim_tsd, sim_seed, sim_out);
    }
    if (fit->parsed()) {
      fit_cfg.restart_seeds = fit_restarts;
      std::optional<std::string> init;
      if (!fit_init.empty()) init = fit_init;
      return cmd_fit(fit_groups, fit_indep, fit_timecol, init, fit_cfg, fit_out);
    }
    if (pre->parsed()) return cmd_preprocess(pre_raw, pre_out);
    if (boot->parsed()) {
      return cmd_bootstrap(boot_fit, boot_B, boot_level, boot_seed, boot_jobs, boot_cfg,
                           boot_out);
    }
    if (ev->parsed()) {
      std::optional<std::string> out;
      if (!ev_out.empty()) out = ev_out;
      return cmd_eval(ev_est, ev_true, out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
