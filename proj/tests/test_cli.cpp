#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "tradecert/dp_certifier.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out;
  std::string err;
  json j() const { return json::parse(out); }
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tradecert");
  std::ostringstream out, err;
  int rc = tradecert::cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() /
           ("tradecert_cli_" + name + "_" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("certify exit codes") {
  auto small = cli({"certify", "--beta", "0.6", "--n", "6", "--eps", "0.25"});
  CHECK(small.rc == 1);
  auto j = small.j();
  CHECK(j["M"].get<double>() ==
        tradecert::brute_force_search(tradecert::DPParams::make(0.6, 6, 0.25)));
  CHECK_FALSE(j["certified"].get<bool>());
  CHECK(j["schema_version"] == 1);
  CHECK(j["provenance"]["config"]["delta"].get<double>() == 1e-6);

  auto ok = cli({"certify", "--beta", "0.5", "--n", "10", "--eps", "0.1"});
  CHECK(ok.rc == 0);
  CHECK(ok.j()["certified"].get<bool>());

  auto div = cli({"certify", "--beta", "0.69", "--n", "5", "--eps", "0.5"});
  CHECK(div.rc == 2);
  CHECK(div.err.find("error bound diverges") != std::string::npos);
  CHECK(div.out.empty());

  CHECK(cli({"certify", "--beta", "0.69", "--n", "35", "--eps", "0.03"}).rc == 2);
  CHECK(cli({"certify", "--beta", "1.5", "--n", "35", "--eps", "0.02"}).rc == 2);
  CHECK(cli({"certify", "--beta", "0.6"}).rc == 2);
  CHECK(cli({"certify", "--beta", "0.69", "--n", "35", "--eps", "0.02857142857",
             "--memory-mb", "1"})
            .rc == 3);
}

TEST_CASE("certify outputs are byte stable and the curve is emitted") {
  auto dir = scratch("curve");
  auto csv = dir / "curve.csv";
  std::vector<std::string> args{"--no-timing", "certify", "--beta", "0.6",   "--n",
                                "8",           "--eps",   "0.25",   "--emit-curve",
                                csv.string(),  "--threads", "1"};
  auto a = cli(args);
  auto b = cli(args);
  CHECK(a.out == b.out);
  auto text = slurp(csv);
  CHECK(text.rfind("segment,s_lo,s_hi,H\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
  fs::remove_all(dir);
}

TEST_CASE("certify resumes from a checkpoint directory") {
  auto dir = scratch("ckpt");
  auto full = cli({"--no-timing", "certify", "--beta", "0.69", "--n", "20", "--eps", "0.05"});
  auto first = cli({"--no-timing", "certify", "--beta", "0.69", "--n", "20", "--eps", "0.05",
                    "--checkpoint-dir", dir.string()});
  CHECK(fs::exists(dir / "dp_stage.ckpt"));
  auto again = cli({"--no-timing", "certify", "--beta", "0.69", "--n", "20", "--eps", "0.05",
                    "--checkpoint-dir", dir.string(), "--resume"});
  CHECK(again.rc == full.rc);
  CHECK(again.j()["M"].get<double>() == full.j()["M"].get<double>());
  auto other = cli({"certify", "--beta", "0.7", "--n", "20", "--eps", "0.05",
                    "--checkpoint-dir", dir.string(), "--resume"});
  CHECK(other.rc == 2);
  CHECK(other.err.find("checkpoint/params mismatch") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("thread count from the environment") {
  setenv("TRADECERT_THREADS", "3", 1);
  auto r = cli({"certify", "--beta", "0.5", "--n", "4", "--eps", "0.5"});
  unsetenv("TRADECERT_THREADS");
  CHECK(r.j()["provenance"]["config"]["threads"] == 3);
}

TEST_CASE("verify-upper") {
  auto d = cli({"verify-upper"});
  CHECK(d.rc == 0);
  auto j = d.j();
  CHECK(std::abs(j["total"].get<double>() - 1.00012) < 5e-4);
  CHECK(j["provenance"]["version"] == "0.1.0");

  auto low = cli({"verify-upper", "--beta", "0.60"});
  CHECK(low.rc == 1);
  CHECK(low.j()["total"].get<double>() < 1.0);

  auto dir = scratch("density");
  auto csv = dir / "q.csv";
  CHECK(cli({"verify-upper", "--emit-density", csv.string(), "--points", "11"}).rc == 0);
  auto text = slurp(csv);
  CHECK(text.rfind("s,q,Q\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
  fs::remove_all(dir);
}

TEST_CASE("worst-seller") {
  auto pt = cli({"worst-seller", "--buyer", R"({"type":"point","value":1})", "--beta", "0.5",
                 "--grid", "101"});
  CHECK(pt.rc == 0);
  auto j = pt.j();
  CHECK(j["gft_max_deviation"].get<double>() < 1e-9);
  for (const auto& row : j["cdf"]) {
    if (row[0].get<double>() < 1.0) CHECK(std::abs(row[1].get<double>() - 0.5) < 1e-9);
  }

  auto w = cli({"worst-seller", "--buyer", "witness", "--beta", "0.7381"});
  CHECK(w.rc == 0);
  CHECK(w.j()["gft_max_deviation"].get<double>() < 1e-6);
  CHECK(w.j()["valid_cdf"].get<bool>());

  auto bad = cli({"worst-seller", "--buyer", R"({"type":"point",)", "--beta", "0.5"});
  CHECK(bad.rc == 2);
  CHECK(bad.err.find("byte") != std::string::npos);
  CHECK(cli({"worst-seller", "--buyer", R"({"type":"point","value":1})", "--beta", "1.5"}).rc ==
        2);
  CHECK(cli({"worst-seller", "--buyer", "/nonexistent/spec.json", "--beta", "0.5"}).rc == 2);
}

TEST_CASE("simulate") {
  auto a = cli({"--no-timing", "simulate", "--setting", "asym", "--n", "100", "--eps", "0.01",
                "--trials", "1e5", "--seed", "7"});
  CHECK(a.rc == 0);
  auto j = a.j();
  CHECK(j["check"]["pass"].get<bool>());
  CHECK(std::abs(j["rejection"]["estimate"].get<double>() - 0.495) <=
        3 * j["rejection"]["stderr"].get<double>());
  auto b = cli({"--no-timing", "simulate", "--setting", "asym", "--n", "100", "--eps", "0.01",
                "--trials", "1e5", "--seed", "7", "--threads", "4"});
  CHECK(b.j()["rejection"] == j["rejection"]);
  CHECK(b.j()["welfare_ratio"] == j["welfare_ratio"]);

  auto s = cli({"simulate", "--setting", "sym", "--q", "0.99", "--n", "100", "--eps", "0.01",
                "--trials", "1e5", "--seed", "3"});
  CHECK(s.rc == 0);
  CHECK(s.j()["check"]["quantity"] == "loss_ratio");

  auto few = cli({"simulate", "--setting", "asym", "--n", "10", "--eps", "0.01", "--trials",
                  "10"});
  CHECK(few.rc == 2);
  CHECK(few.err.find("trials below minimum") != std::string::npos);
  CHECK(cli({"simulate", "--setting", "asym", "--n", "10", "--eps", "0.01", "--mech",
             "magic"})
            .rc == 2);
  CHECK(cli({"simulate", "--setting", "skew", "--n", "10", "--eps", "0.01"}).rc == 2);

  auto dir = scratch("mech");
  {
    std::ofstream(dir / "m.json") << R"({"type":"scaled","factor":2.0})";
    std::ofstream(dir / "bad.json") << R"({"type":"scaled")";
  }
  auto f = cli({"simulate", "--setting", "asym", "--n", "20", "--eps", "0.05", "--mech",
                "file:" + (dir / "m.json").string(), "--trials", "20000",
                "--sequence-csv", (dir / "seq.csv").string()});
  CHECK(f.rc == 0);
  CHECK(f.j()["mechanism"]["type"] == "scaled");
  CHECK(fs::exists(dir / "seq.csv"));
  CHECK(cli({"simulate", "--setting", "asym", "--n", "20", "--eps", "0.05", "--mech",
             "file:" + (dir / "bad.json").string()})
            .rc == 2);
  fs::remove_all(dir);
}

TEST_CASE("ratio") {
  auto a = cli({"ratio", "--buyer", R"({"type":"point","value":1})", "--seller",
                R"({"type":"point","value":0})"});
  CHECK(a.rc == 0);
  CHECK(std::abs(a.j()["ratio"].get<double>() - 1.0) < 1e-12);

  auto u = cli({"ratio", "--buyer", R"({"type":"uniform","lo":0,"hi":1})", "--seller",
                R"({"type":"point","value":0})"});
  CHECK(std::abs(u.j()["ratio"].get<double>() - 1.0) < 1e-12);
  CHECK(u.j()["price"].get<double>() == 0.0);

  const int m = 1000;
  auto w = cli({"ratio", "--buyer", "witness", "--seller", "worst", "--grid", std::to_string(m)});
  CHECK(w.rc == 0);
  CHECK(w.j()["ratio"].get<double>() <= 0.7381 + 2.0 / m);

  CHECK(cli({"ratio", "--buyer", R"({"type":"uniform","lo":1,"hi":0})", "--seller",
             R"({"type":"point","value":0})"})
            .rc == 2);
  CHECK(cli({"ratio", "--buyer", R"({"type":"point","value":1})", "--seller",
             R"({"type":"point","value":0,"tail":0.5})"})
            .rc == 2);
}

TEST_CASE("top level") {
  CHECK(cli({}).rc == 2);
  CHECK(cli({"frobnicate"}).rc == 2);
  auto v = cli({"--version"});
  CHECK(v.rc == 0);
  CHECK(v.out == "0.1.0\n");
  CHECK(cli({"--help"}).rc == 0);
}
