#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>

#include "boxgnn/checkpoint.hpp"
#include "boxgnn/config.hpp"
#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace boxgnn;
using nlohmann::json;

namespace {

RunConfig parse(const std::string& text) { return parse_config(text, "."); }

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("boxgnn_test_config_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.kind = "fitness";
  c.config = config_to_json(parse("{}"));
  c.metadata = {{"epochs", 3}, {"final_loss", 0.125}};
  Rng rng(1);
  c.params.add("a", testing::random_tensor(rng, 3, 4, -1e6, 1e6));
  c.params.add("b", Tensor::from_rows({{-0.0, std::numeric_limits<double>::denorm_min(), 0.1,
                                        std::numeric_limits<double>::max()}}),
               false);
  c.params.add("empty", Tensor(0, 5));
  return c;
}

}  // namespace

TEST_CASE("defaults snapshot") {
  const auto c = parse("{}");
  const auto j = config_to_json(c);
  CHECK(j["fitness_training"]["alpha"] == 0.1);
  CHECK(j["fitness_training"]["beta_neg"] == 0.05);
  CHECK(j["fitness_training"]["epochs"] == 160);
  CHECK(j["fitness_training"]["lr"] == 1e-4);
  CHECK(j["fitness_training"]["lambda_wd"] == 0.1);
  CHECK(j["fitness_training"]["hidden"] == json::array({64}));
  CHECK(j["fitness_training"]["folds"] == 5);
  CHECK(j["fitness_training"]["prior_mode"] == "random");
  CHECK(j["gnn"]["depth"] == 2);
  CHECK(j["priors"]["epochs"] == 1000);
  CHECK(j["priors"]["gumbel_temp"] == 0.25);
  CHECK(j["joint"]["epochs"] == 500);
  CHECK(j["joint"]["lr"] == 0.1);
  CHECK(j["link_eval"]["mode"] == "corner");
  CHECK(c.graph.add_reverse);
}

TEST_CASE("config round trip") {
  const std::string text = R"({
    "graph": {"axioms": "a.tsv", "domains": "d.tsv", "min_edge_count": 3, "sibling_disjointness": ["root"]},
    "fitness": "fit.tsv", "gene_domain": "genes", "seed": 42, "jobs": 2,
    "default_dims": {"prior": 3, "gnn": 8},
    "domain_dims": {"genes": {"gnn": 16}},
    "gnn": {"depth": 1},
    "priors": {"epochs": 10, "domains": {"genes": {"lr": 0.5}}},
    "fitness_training": {"alpha": 0.0, "loss": "overlap", "combiner": "bilinear", "hidden": [4, 2],
                         "semantic_domains": ["traits"], "prior_mode": "frozen", "prior_checkpoint": "p.json"},
    "joint": {"loss": "overlap", "norm": "l1", "domains": ["traits"]},
    "attribution": {"top_k": 5, "allow_predicates": ["hasTrait"]},
    "link_eval": {"mode": "box_distance"},
    "synthetic": {"genes": 10, "noise": 0.1}
  })";
  const auto c = parse(text);
  CHECK(c.seed == 42);
  CHECK(c.synthetic.seed == 42);
  CHECK(c.default_dims == DomainDims{3, 8});
  CHECK(c.domain_dims.at("genes") == DomainDims{3, 16});
  CHECK(c.prior_overrides.at("genes").lr == 0.5);
  CHECK(c.prior_overrides.at("genes").epochs == 10);
  CHECK(c.fitness_training.prior_mode == PriorMode::Frozen);
  CHECK(c.link_eval.mode == DisplacementMode::BoxDistance);
  CHECK(c.resolve("x.tsv") == fs::path(".") / "x.tsv");

  const auto j = config_to_json(c);
  const auto again = parse(j.dump());
  CHECK(config_to_json(again) == j);
  const auto defaults = config_to_json(parse("{}"));
  CHECK(config_to_json(parse(defaults.dump())) == defaults);
}

TEST_CASE("config errors name the key") {
  CHECK(config_error(R"({"bogus": 1})").find("'bogus'") != std::string::npos);
  CHECK(config_error(R"({"graph": {"axiom": "x"}})").find("'graph.axiom'") != std::string::npos);
  CHECK(config_error(R"({"fitness_training": {"alpha": "big"}})").find("'fitness_training.alpha'") !=
        std::string::npos);
  CHECK(config_error(R"({"fitness_training": {"lr": 0}})").find("'fitness_training.lr'") != std::string::npos);
  CHECK(config_error(R"({"fitness_training": {"alpha": -1}})").find("'fitness_training.alpha'") !=
        std::string::npos);
  CHECK(config_error(R"({"joint": {"lr_decay": 1.0}})").find("'joint.lr_decay'") != std::string::npos);
  CHECK(config_error(R"({"seed": 1.5})").find("'seed'") != std::string::npos);
  CHECK(config_error(R"({"default_dims": {"gnn": 7}})").find("'default_dims.gnn'") != std::string::npos);
  CHECK(config_error(R"({"domain_dims": {"x": {"width": 4}}})").find("'domain_dims.x.width'") != std::string::npos);
  CHECK(config_error(R"({"priors": {"domains": {"x": {"dim": 4}}}})").find("'priors.domains.x.dim'") !=
        std::string::npos);
  CHECK(config_error(R"({"link_eval": {"mode": "euclid"}})").find("'link_eval.mode'") != std::string::npos);
  CHECK(config_error(R"({"fitness_training": {"prior_mode": "fine_tune"}})").find("prior_checkpoint") !=
        std::string::npos);
  CHECK(config_error(R"({"synthetic": {"traits_per_gene": 9, "leaves_per_group": 3}})")
            .find("'synthetic.traits_per_gene'") != std::string::npos);
  CHECK(config_error(R"({"graph": 3})").find("'graph'") != std::string::npos);
  CHECK_FALSE(config_error("{not json").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/boxgnn.json"), ConfigError);
}

TEST_CASE("config names resolved against a graph") {
  const auto g = testing::graph("b\tsubClassOf\ta\n", "a\tD\nb\tD\nx\tE\n");
  auto c = parse(R"({"domain_dims": {"E": {"prior": 2, "gnn": 4}}, "default_dims": {"prior": 1, "gnn": 2}})");
  const auto dims = resolve_dims(c, g);
  CHECK(dims[*g.find_domain("D")] == DomainDims{1, 2});
  CHECK(dims[*g.find_domain("E")] == DomainDims{2, 4});
  c.domain_dims["nope"] = DomainDims{1, 2};
  try {
    resolve_dims(c, g);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("domain_dims.nope") != std::string::npos);
  }
  CHECK_THROWS_AS(resolve_domain(g, "F", "gene_domain"), ConfigError);

  auto d = parse(R"({"graph": {"sibling_disjointness": ["missing"]}})");
  CHECK_THROWS_AS(prepare_graph(g, d), ConfigError);
  d.graph.sibling_disjointness = {"a"};
  d.graph.add_reverse = false;
  CHECK(prepare_graph(g, d).num_classes() == g.num_classes());
}

TEST_CASE("base64 known vectors") {
  auto enc = [](std::string_view s) {
    return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foob") == "Zm9vYg==");
  CHECK(enc("fooba") == "Zm9vYmE=");
  CHECK(enc("foobar") == "Zm9vYmFy");
  const auto bytes = base64_decode("Zm9vYmE=");
  CHECK(std::string(bytes.begin(), bytes.end()) == "fooba");
  CHECK_THROWS_AS(base64_decode("Zm9"), DataError);
  CHECK_THROWS_AS(base64_decode("Zm9*"), DataError);

  // 1.0 is 0x3ff0000000000000, little-endian
  CHECK(encode_doubles(std::vector<double>{1.0}) == "AAAAAAAA8D8=");
}

TEST_CASE("doubles round-trip bit-exactly") {
  Rng rng(2);
  std::vector<double> v{0.0,
                        -0.0,
                        std::numeric_limits<double>::denorm_min(),
                        std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::max(),
                        std::nextafter(1.0, 2.0)};
  for (int k = 0; k < 1000; ++k) v.push_back(std::bit_cast<double>(rng.next()));
  const auto back = decode_doubles(encode_doubles(v));
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(v[i]));
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  const auto dir = temp_dir("roundtrip");
  const auto c = sample_checkpoint();
  save_checkpoint(dir / "a.json", c);
  const auto loaded = load_checkpoint(dir / "a.json");
  CHECK(loaded.params == c.params);
  CHECK(loaded.kind == "fitness");
  CHECK(loaded.metadata == c.metadata);
  CHECK(loaded.config == c.config);
  save_checkpoint(dir / "b.json", loaded);
  CHECK(tsv::read_file(dir / "a.json") == tsv::read_file(dir / "b.json"));
  CHECK(checkpoint_to_string(c) == checkpoint_to_string(sample_checkpoint()));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint validation") {
  auto j = json::parse(checkpoint_to_string(sample_checkpoint()));
  CHECK_NOTHROW(checkpoint_from_string(j.dump()));

  auto wrong_version = j;
  wrong_version["version"] = kCheckpointVersion + 1;
  try {
    checkpoint_from_string(wrong_version.dump());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  auto wrong_format = j;
  wrong_format["format"] = "other";
  CHECK_THROWS_AS(checkpoint_from_string(wrong_format.dump()), DataError);
  auto bad_shape = j;
  bad_shape["parameters"][0]["shape"] = {2, 2};
  CHECK_THROWS_AS(checkpoint_from_string(bad_shape.dump()), DataError);
  auto bad_data = j;
  bad_data["parameters"][0]["data"] = "@@@@";
  CHECK_THROWS_AS(checkpoint_from_string(bad_data.dump()), DataError);
  auto missing = j;
  missing.erase("kind");
  CHECK_THROWS_AS(checkpoint_from_string(missing.dump()), DataError);
  CHECK_THROWS_AS(checkpoint_from_string("not json"), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), DataError);
}
