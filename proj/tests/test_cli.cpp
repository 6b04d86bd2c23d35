#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "boxgnn/box_ops.hpp"
#include "boxgnn/checkpoint.hpp"
#include "boxgnn/tsv.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace boxgnn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

/// Runs the CLI in `dir` with the given arguments.
Run cli(const fs::path& dir, const std::string& args) {
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      "cd '" + dir.string() + "' && '" BOXGNN_CLI "' " + args + " > stdout.txt 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = tsv::read_file(err);
  return r;
}

std::string read(const fs::path& p) { return tsv::read_file(p); }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kBase = R"({
  "graph": {"axioms": "data/axioms.tsv", "domains": "data/domains.tsv"},
  "fitness": "data/fitness.tsv",
  "seed": 3,
  "default_dims": {"prior": 2, "gnn": 4},
  "gnn": {"depth": 1},
  "priors": {"epochs": 20},
  "fitness_training": {"epochs": 5, "folds": 3, "hidden": [4], "lr": 0.01},
  "joint": {"epochs": 10},
  "synthetic": {"genes": 12, "trait_groups": 2, "leaves_per_group": 3}
})";

/// Fresh directory with a config and generated synthetic data.
fs::path workspace(const std::string& name, const std::string& config = kBase) {
  const auto dir = fs::temp_directory_path() / ("boxgnn_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  tsv::write_file(dir / "config.json", config);
  REQUIRE(cli(dir, "gen-synthetic --config config.json --output data").code == 0);
  return dir;
}

std::string with(const std::string& base, const std::string& key, const json& value) {
  auto j = json::parse(base);
  j[key] = value;
  return j.dump();
}

}  // namespace

TEST_CASE("gen-synthetic is deterministic") {
  const auto dir = workspace("gen");
  for (const char* f : {"axioms.tsv", "domains.tsv", "fitness.tsv"}) CHECK(fs::exists(dir / "data" / f));
  REQUIRE(cli(dir, "gen-synthetic --config config.json --output again").code == 0);
  CHECK(read(dir / "data/fitness.tsv") == read(dir / "again/fitness.tsv"));
  CHECK(read(dir / "data/axioms.tsv") == read(dir / "again/axioms.tsv"));
  REQUIRE(cli(dir, "gen-synthetic --config config.json --output other --seed 9").code == 0);
  CHECK(read(dir / "data/axioms.tsv") != read(dir / "other/axioms.tsv"));
  // 12 genes give 66 unordered pairs
  CHECK(lines(read(dir / "data/fitness.tsv")) == 66);
}

TEST_CASE("train-priors writes a reproducible checkpoint") {
  const auto dir = workspace("priors");
  REQUIRE(cli(dir, "train-priors --config config.json --output a").code == 0);
  const auto a = read(dir / "a/checkpoint.json");
  REQUIRE(cli(dir, "train-priors --config config.json --output a").code == 0);
  CHECK(a == read(dir / "a/checkpoint.json"));
  // the snapshot records jobs and output; the trained values do not depend on them
  REQUIRE(cli(dir, "train-priors --config config.json --output c --jobs 2").code == 0);
  REQUIRE(cli(dir, "train-priors --config config.json --output d --seed 4").code == 0);
  CHECK(load_checkpoint(dir / "c/checkpoint.json").params == load_checkpoint(dir / "a/checkpoint.json").params);
  CHECK(read(dir / "c/metrics.tsv") == read(dir / "a/metrics.tsv"));
  CHECK(load_checkpoint(dir / "d/checkpoint.json").params != load_checkpoint(dir / "a/checkpoint.json").params);
  CHECK(read(dir / "a/metrics.tsv").starts_with("epoch\tlayer\tdomain\tpos_loss\tneg_loss\n"));
  const auto ck = load_checkpoint(dir / "a/checkpoint.json");
  CHECK(ck.kind == "priors");
  CHECK(ck.params.contains("prior/gene"));
  CHECK(ck.params.contains("prior/trait"));
  CHECK(ck.params.value(ck.params.index("prior/trait")).cols() == 4);

  // the exported prior boxes match the checkpoint latents exactly
  REQUIRE(cli(dir, "export-boxes --config config.json --checkpoint a/checkpoint.json --output a").code == 0);
  const auto text = read(dir / "a/boxes.tsv");
  const auto rows = parse_box_rows(text);
  std::size_t classes = 0;
  for (const auto& name : {"prior/gene", "prior/trait"}) classes += ck.params.value(ck.params.index(name)).rows();
  CHECK(rows.size() == classes);
  std::string again;
  for (const auto& r : rows) again += format_box_row(r) + "\n";
  CHECK(again == text);
  ad::Tape tape;
  const auto boxes = to_boxes(boxes_from_latents(tape.constant(ck.params.value(ck.params.index("prior/trait")))));
  std::size_t matched = 0;
  for (const auto& r : rows) {
    if (r.domain != "trait") continue;
    CHECK(r.layer == 0);
    CHECK(r.box == boxes[matched]);
    ++matched;
  }
  CHECK(matched == boxes.size());
}

TEST_CASE("train-fitness, attribute and export") {
  const auto dir = workspace("fitness");
  REQUIRE(cli(dir, "train-fitness --config config.json --output a").code == 0);
  const auto first = read(dir / "a/checkpoint.json");
  const auto first_pred = read(dir / "a/predictions.tsv");
  REQUIRE(cli(dir, "train-fitness --config config.json --output a").code == 0);
  REQUIRE(cli(dir, "train-fitness --config config.json --output b --jobs 2").code == 0);
  for (const char* f : {"folds.tsv", "predictions.tsv", "checkpoint.json", "checkpoint_fold2.json", "training_fold1.tsv",
                        "metrics_fold0.tsv"}) {
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  }
  CHECK(read(dir / "a/checkpoint.json") == first);
  CHECK(read(dir / "a/predictions.tsv") == first_pred);
  CHECK(read(dir / "b/predictions.tsv") == first_pred);
  CHECK(read(dir / "b/folds.tsv") == read(dir / "a/folds.tsv"));

  // header, one row per fold, then the mean/SD row
  const auto folds = read(dir / "a/folds.tsv");
  CHECK(folds.starts_with("fold\tn_valid\tr2\tsd\n"));
  CHECK(lines(folds) == 1 + 3 + 1);
  CHECK(folds.find("\nmean\t66\t") != std::string::npos);
  // validation pairs have both genes in the held-out fold
  std::size_t n_valid = 0;
  tsv::for_each_record(folds, [&](std::size_t line, std::string_view row) {
    const auto f = tsv::split(row);
    if (line > 1 && f[0] != "mean") n_valid += std::stoul(std::string(f[1]));
  });
  CHECK(n_valid > 0);
  CHECK(lines(read(dir / "a/predictions.tsv")) == 1 + n_valid);

  const auto ck = load_checkpoint(dir / "a/checkpoint.json");
  CHECK(ck.kind == "fitness");
  CHECK(ck.config["fitness_training"]["alpha"] == 0.1);
  CHECK(ck.config["fitness_training"]["beta_neg"] == 0.05);

  REQUIRE(cli(dir, "attribute --config config.json --checkpoint a/checkpoint.json --output a").code == 0);
  REQUIRE(cli(dir, "attribute --config config.json --checkpoint a/checkpoint.json --output b").code == 0);
  const auto imp = read(dir / "a/importances.tsv");
  CHECK(imp == read(dir / "b/importances.tsv"));
  CHECK(imp.starts_with("rank\tscore\tpred1\tclass1\tpred2\tclass2\n"));
  CHECK(lines(imp) > 1);

  REQUIRE(cli(dir, "export-boxes --config config.json --checkpoint a/checkpoint.json --output a").code == 0);
  const auto rows = parse_box_rows(read(dir / "a/boxes.tsv"));
  std::size_t classes = 0;
  for (const auto& name : {"prior/gene", "prior/trait"}) classes += ck.params.value(ck.params.index(name)).rows();
  // priors plus one GNN layer
  CHECK(rows.size() == 2 * classes);

  // a priors checkpoint is not a fitness model
  REQUIRE(cli(dir, "train-priors --config config.json --output p").code == 0);
  const auto wrong = cli(dir, "attribute --config config.json --checkpoint p/checkpoint.json --output p");
  CHECK(wrong.code == 3);
  CHECK(wrong.err.find("kind") != std::string::npos);

  // frozen priors from the priors checkpoint
  tsv::write_file(dir / "frozen.json",
                  json::parse(with(kBase, "fitness_training",
                                   {{"epochs", 3}, {"folds", 3}, {"hidden", {4}}, {"prior_mode", "frozen"},
                                    {"prior_checkpoint", "p/checkpoint.json"}}))
                      .dump());
  REQUIRE(cli(dir, "train-fitness --config frozen.json --output f").code == 0);
  const auto fk = load_checkpoint(dir / "f/checkpoint.json");
  const auto pk = load_checkpoint(dir / "p/checkpoint.json");
  CHECK(fk.params.value(fk.params.index("prior/trait")) == pk.params.value(pk.params.index("prior/trait")));
}

TEST_CASE("train-joint and link-eval") {
  const auto dir = workspace("joint");
  REQUIRE(cli(dir, "train-joint --config config.json --output j").code == 0);
  const auto ck = load_checkpoint(dir / "j/checkpoint.json");
  CHECK(ck.kind == "joint");
  CHECK_FALSE(ck.metadata["held_out_edges"].empty());

  REQUIRE(cli(dir, "link-eval --config config.json --checkpoint j/checkpoint.json --output a").code == 0);
  REQUIRE(cli(dir, "link-eval --config config.json --checkpoint j/checkpoint.json --output b --jobs 2").code == 0);
  const auto summary = read(dir / "a/link_summary.tsv");
  CHECK(summary == read(dir / "b/link_summary.tsv"));
  CHECK(read(dir / "a/link_results.tsv") == read(dir / "b/link_results.tsv"));
  CHECK(summary.starts_with("relation\tn_test\tmean_real\tmean_constrained\tmean_random\tu_real_vs_random\t"
                            "p_real_vs_random\tu_real_vs_constrained\tp_real_vs_constrained\n"));
  // three kinds per held-out edge
  CHECK(lines(read(dir / "a/link_results.tsv")) == 1 + 3 * ck.metadata["held_out_edges"].size());

  REQUIRE(cli(dir, "export-boxes --config config.json --checkpoint j/checkpoint.json --output a").code == 0);
  CHECK_FALSE(parse_box_rows(read(dir / "a/boxes.tsv")).empty());
}

TEST_CASE("exit codes") {
  const auto dir = workspace("codes");
  // invalid domain name in the config
  tsv::write_file(dir / "bad_domain.json", with(kBase, "domain_dims", {{"nonexistent", {{"prior", 2}}}}));
  auto r = cli(dir, "train-priors --config bad_domain.json --output x");
  CHECK(r.code == 2);
  CHECK(r.err.find("domain_dims.nonexistent") != std::string::npos);

  tsv::write_file(dir / "unknown_key.json", with(kBase, "learning_rate", 0.1));
  r = cli(dir, "train-priors --config unknown_key.json --output x");
  CHECK(r.code == 2);
  CHECK(r.err.find("learning_rate") != std::string::npos);

  CHECK(cli(dir, "train-priors --output x").code == 2);
  CHECK(cli(dir, "no-such-command").code == 2);
  CHECK(cli(dir, "train-priors --config missing.json").code == 2);
  CHECK(cli(dir, "train-priors --config config.json --jobs 0").code == 2);

  // missing data file
  tsv::write_file(dir / "no_data.json", with(kBase, "graph", {{"axioms", "nowhere.tsv"}, {"domains", "nowhere.tsv"}}));
  r = cli(dir, "train-priors --config no_data.json --output x");
  CHECK(r.code == 3);
  CHECK(r.err.find("nowhere.tsv") != std::string::npos);
  CHECK(cli(dir, "link-eval --config config.json --checkpoint missing.json").code == 3);

  // divergence
  tsv::write_file(dir / "diverge.json", with(kBase, "priors", {{"epochs", 5}, {"lr", 1e300}}));
  r = cli(dir, "train-priors --config diverge.json --output x");
  CHECK(r.code == 4);

  CHECK(cli(dir, "train-priors --config config.json --output ok").code == 0);
  CHECK(cli(dir, "--help").code == 0);
}
