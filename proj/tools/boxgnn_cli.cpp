#include <iostream>

#include "CLI11.hpp"
#include "boxgnn/errors.hpp"
#include "commands.hpp"

namespace {

using boxgnn::cli::CommandOptions;

void add_common(CLI::App* sub, CommandOptions& o, bool config_required) {
  auto* c = sub->add_option("--config", o.config, "run configuration (JSON)");
  if (config_required) c->required();
  sub->add_option("--seed", o.seed, "override the configured seed");
  sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--output", o.output, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box embeddings of knowledge graphs with heterogeneous GNNs"};
  app.require_subcommand(1);
  CommandOptions o;

  struct Entry {
    const char* name;
    const char* help;
    void (*run)(const CommandOptions&);
    bool needs_config;
    bool reads_checkpoint;
  };
  const Entry entries[] = {
      {"gen-synthetic", "write a synthetic hierarchy and fitness dataset", boxgnn::cli::gen_synthetic, false, false},
      {"train-priors", "train per-domain prior boxes", boxgnn::cli::train_priors, true, false},
      {"train-fitness", "train the fitness predictor with cross-validation", boxgnn::cli::train_fitness, true, false},
      {"train-joint", "train the GNN on the hierarchy with held-out edges", boxgnn::cli::train_joint, true, false},
      {"attribute", "rank knowledge-graph edge pairs by importance", boxgnn::cli::attribute, true, true},
      {"link-eval", "measure embedding displacement of held-out edges", boxgnn::cli::link_eval, true, true},
      {"export-boxes", "write the boxes of every class and layer", boxgnn::cli::export_boxes, true, true},
  };
  void (*selected)(const CommandOptions&) = nullptr;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, o, e.needs_config);
    if (e.reads_checkpoint) sub->add_option("--checkpoint", o.checkpoint, "checkpoint file");
    sub->callback([&selected, run = e.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    selected(o);
  } catch (const boxgnn::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const boxgnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const boxgnn::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
