#include "tdhm/io.hpp"

#include "tdhm/model.hpp"
#include "tdhm/numeric.hpp"
#include "tdhm/simulate.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace tdhm;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tdhm_io_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cli_path() {
  const char* env = std::getenv("TDHM_CLI");
  return env ? env : "";
}

int run_cli(const std::string& args) {
  const int status = std::system((cli_path() + " " + args).c_str());
  return WEXITSTATUS(status);
}

ModelParams random_params(int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n = n;
  cfg.alpha = 1.3;
  cfg.beta = 2.1;
  cfg.gamma = -0.4;
  Rng rng = make_rng(seed);
  return sample_parameters(cfg, rng);
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("g17 formatting round-trips doubles exactly") {
  for (const double v : {1.0 / 3.0, 3.141592653589793, 1e-300, -2.5e17, 0.1}) {
    CHECK(std::stod(io::format_g17(v)) == v);
  }
  CHECK(io::format_g17(pos_inf()) == "inf");
  CHECK(io::format_g17(neg_inf()) == "-inf");
}

TEST_CASE("params file round-trip is bit-identical") {
  const fs::path p = scratch_dir() / "params.txt";
  ModelParams orig = random_params(7, 17);
  // Exercise the clamp bound and a negative extreme.
  orig.theta(0, 1) = orig.theta(1, 0) = kThetaMax;
  orig.theta(2, 3) = orig.theta(3, 2) = -kThetaMax;
  io::write_params_file(p.string(), orig);
  const ModelParams back = io::read_params_file(p.string());

  CHECK(back.n == orig.n);
  CHECK(back.alpha == orig.alpha);
  CHECK(back.beta == orig.beta);
  CHECK(back.gamma == orig.gamma);
  for (int i = 0; i < orig.n; ++i) {
    CHECK(back.u[i] == orig.u[i]);
    CHECK(std::isinf(back.theta(i, i)));
    for (int j = 0; j < orig.n; ++j) {
      if (i != j) CHECK(back.theta(i, j) == orig.theta(i, j));
    }
  }
}

TEST_CASE("groups file round-trip preserves the matrix, labels and times") {
  const fs::path p = scratch_dir() / "groups.csv";
  BinaryMatrix g(3, 4);
  g << 1, 0, 1, 0,
       0, 1, 1, 0,
       1, 1, 1, 1;
  const GroupedData orig =
      GroupedData::create(g, {"ann", "bo", "cy", "dee"},
                          std::vector<double>{1.5, 2.0, 3.25});
  io::write_groups_file(p.string(), orig);
  const GroupedData back = io::read_groups_file(p.string());
  CHECK(back.groups == orig.groups);
  CHECK(back.node_labels == orig.node_labels);
  REQUIRE(back.timestamps.has_value());
  CHECK(*back.timestamps == *orig.timestamps);
}

TEST_CASE("headerless groups files parse with and without a time column") {
  const fs::path p = scratch_dir() / "plain.csv";
  write_file(p, "1,0,1\n0,1,1\n");
  const GroupedData g = io::read_groups_file(p.string());
  CHECK(g.T() == 2);
  CHECK(g.n() == 3);
  CHECK_FALSE(g.timestamps.has_value());

  const fs::path q = scratch_dir() / "timed.csv";
  write_file(q, "3,1,0,1\n4,0,1,1\n");
  const GroupedData gt = io::read_groups_file(q.string(), /*assume_time_column=*/true);
  CHECK(gt.n() == 3);
  REQUIRE(gt.timestamps.has_value());
  CHECK((*gt.timestamps)[0] == 3.0);
}

TEST_CASE("groups parse errors carry line numbers") {
  const fs::path bad1 = scratch_dir() / "bad1.csv";
  write_file(bad1, "a,b\n1,0\n1,2\n");
  try {
    io::read_groups_file(bad1.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  const fs::path bad2 = scratch_dir() / "bad2.csv";
  write_file(bad2, "a,b\n1,0\n0,0\n");
  try {
    io::read_groups_file(bad2.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("empty group") != std::string::npos);
  }

  const fs::path bad3 = scratch_dir() / "bad3.csv";
  write_file(bad3, "a,b\n1,0,1\n");
  CHECK_THROWS_AS(io::read_groups_file(bad3.string()), ParseError);
}

TEST_CASE("raw records accept label lists and binary vectors") {
  const fs::path p = scratch_dir() / "raw.txt";
  write_file(p,
             "# nodes: ann,bo,cy\n"
             "1 | ann,cy | 1,1,0\n"
             "2 | bo\n");
  const RawRecords raw = io::read_raw_records(p.string());
  CHECK(raw.node_labels == std::vector<std::string>{"ann", "bo", "cy"});
  REQUIRE(raw.events.size() == 2);
  CHECK(raw.events[0].candidates.size() == 2);
  CHECK(raw.events[0].candidates[0][0] == 1);
  CHECK(raw.events[0].candidates[0][2] == 1);
  CHECK(raw.events[0].candidates[1][1] == 1);
  CHECK(raw.events[1].candidates[0][1] == 1);

  const fs::path q = scratch_dir() / "raw_nolabels.txt";
  write_file(q, "1 | x,y\n2 | y,z\n");
  const RawRecords r2 = io::read_raw_records(q.string());
  CHECK(r2.node_labels == std::vector<std::string>{"x", "y", "z"});

  const fs::path bad = scratch_dir() / "raw_bad.txt";
  write_file(bad, "# nodes: a,b\n1 | a,q\n");
  try {
    io::read_raw_records(bad.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("matrix csv round-trip") {
  const fs::path p = scratch_dir() / "m.csv";
  Matrix m(2, 3);
  m << 0.1, 2.0 / 3.0, -5.25, 1e-12, 3.0, 4.5;
  io::write_matrix_csv(p.string(), m);
  const Matrix back = io::read_matrix_csv(p.string());
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cli: simulate is deterministic and honors --T") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path d1 = scratch_dir() / "sim1";
  const fs::path d2 = scratch_dir() / "sim2";
  const std::string args =
      " --n 6 --T 12 --alpha log-n --beta 2 --gamma -0.5 --seed 7 -o ";
  CHECK(run_cli("simulate" + args + d1.string()) == 0);
  CHECK(run_cli("simulate" + args + d2.string()) == 0);
  for (const char* f : {"params_true.txt", "groups.csv", "leaders_true.csv"}) {
    CHECK(read_file(d1 / f) == read_file(d2 / f));
    CHECK(!read_file(d1 / f).empty());
  }
  const auto manifest = nlohmann::json::parse(read_file(d1 / "manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["config"]["alpha"].get<double>() == doctest::Approx(std::log(5.0)));

  const fs::path d3 = scratch_dir() / "sim_t1";
  CHECK(run_cli("simulate --n 4 --T 1 --seed 3 -o " + d3.string()) == 0);
  std::istringstream rows(read_file(d3 / "groups.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(rows, line)) ++lines;
  CHECK(lines == 2);  // header + one group
}

TEST_CASE("cli: fit writes the full output set and warm restarts are fixed points") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path sim = scratch_dir() / "fit_sim";
  REQUIRE(run_cli("simulate --n 5 --T 80 --alpha 1 --beta 2 --gamma -0.5 --seed 11 -o " +
                  sim.string()) == 0);
  const fs::path fit1 = scratch_dir() / "fit_out";
  REQUIRE(run_cli("fit --groups " + (sim / "groups.csv").string() +
                  " --max-em-iters 150 -o " + fit1.string()) == 0);
  for (const char* f :
       {"params_hat.txt", "A_hat.csv", "B_hat.csv", "C_hat.csv", "rho_hat.csv",
        "posterior_R.csv", "labels.txt", "leaders.csv", "segments.csv",
        "loglik_trace.csv", "manifest.json"}) {
    CHECK(fs::exists(fit1 / f));
  }
  const auto m1 = nlohmann::json::parse(read_file(fit1 / "manifest.json"));
  CHECK(m1["command"] == "fit");
  CHECK(m1["data"]["T"] == 80);

  const fs::path fit2 = scratch_dir() / "fit_warm";
  REQUIRE(run_cli("fit --groups " + (sim / "groups.csv").string() + " --init-params " +
                  (fit1 / "params_hat.txt").string() + " --max-em-iters 150 -o " +
                  fit2.string()) == 0);
  const auto m2 = nlohmann::json::parse(read_file(fit2 / "manifest.json"));
  const double ll1 = m1["result"]["log_marginal"].get<double>();
  const double ll2 = m2["result"]["log_marginal"].get<double>();
  CHECK(std::abs(ll2 - ll1) < 1e-5);
  CHECK(m2["result"]["iterations"].get<int>() <= 1);
}

TEST_CASE("cli: malformed groups fail with exit 1, bad flags with exit 2") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path bad = scratch_dir() / "allzero.csv";
  write_file(bad, "a,b\n1,0\n0,0\n");
  CHECK(run_cli("fit --groups " + bad.string() + " -o " +
                (scratch_dir() / "nofit").string() + " 2>/dev/null") == 1);
  CHECK(run_cli("fit --no-such-flag 2>/dev/null") == 2);
  CHECK(run_cli("simulate --n 1 --T 5 -o " + (scratch_dir() / "badsim").string() +
                " 2>/dev/null") == 2);
}

TEST_CASE("cli: preprocess resolves candidates and reports removals") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path raw = scratch_dir() / "raw_events.txt";
  write_file(raw,
             "# nodes: a,b,c,d\n"
             "1 | a,b\n"
             "2 | c | a,b\n"
             "3 | a,b,c\n");
  const fs::path out = scratch_dir() / "pre_out";
  REQUIRE(run_cli("preprocess --raw " + raw.string() + " -o " + out.string()) == 0);
  const GroupedData g = io::read_groups_file((out / "groups.csv").string());
  CHECK(g.T() == 3);
  CHECK(g.n() == 3);  // d removed
  const std::string report = read_file(out / "preprocess_report.txt");
  CHECK(report.find("removed_nodes d") != std::string::npos);
  // Event 2 keeps its second candidate (jaccard 1 against the previous group).
  CHECK(report.find("retained_candidate 1 2 1") != std::string::npos);
}

TEST_CASE("cli: bootstrap writes the replicate table and ci summary") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path sim = scratch_dir() / "bs_sim";
  REQUIRE(run_cli("simulate --n 4 --T 50 --alpha 1 --beta 1.5 --gamma -0.5 --seed 19 -o " +
                  sim.string()) == 0);
  const fs::path fit = scratch_dir() / "bs_fit";
  REQUIRE(run_cli("fit --groups " + (sim / "groups.csv").string() +
                  " --max-em-iters 60 -o " + fit.string()) == 0);
  const fs::path out = scratch_dir() / "bs_out";
  REQUIRE(run_cli("bootstrap --fit " + fit.string() +
                  " --B 2 --seed 5 --max-em-iters 60 -o " + out.string()) == 0);
  std::istringstream reps(read_file(out / "replicates.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(reps, line)) ++rows;
  CHECK(rows == 3);  // header + B rows
  CHECK(read_file(out / "ci.csv").find("alpha,") != std::string::npos);
}

TEST_CASE("cli: eval reports zero error against itself and rejects size mismatch") {
  REQUIRE_FALSE(cli_path().empty());
  const fs::path pa = scratch_dir() / "pa.txt";
  const fs::path pb = scratch_dir() / "pb.txt";
  io::write_params_file(pa.string(), random_params(5, 31));
  io::write_params_file(pb.string(), random_params(4, 33));

  const fs::path out = scratch_dir() / "eval_out";
  REQUIRE(run_cli("eval --estimated " + pa.string() + " --true " + pa.string() + " -o " +
                  out.string()) == 0);
  const std::string report = read_file(out / "eval.txt");
  CHECK(report.find("rmse_A 0\n") != std::string::npos);
  CHECK(report.find("abs_err_alpha 0\n") != std::string::npos);

  CHECK(run_cli("eval --estimated " + pa.string() + " --true " + pb.string() +
                " 2>/dev/null") == 2);
}

}  // TEST_SUITE
