// ams: adaptive mutual supervision for weakly-supervised temporal action
// localization, at desk scale. Subcommands: generate, train, eval, ablate,
// dump-cas. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ams/cli.hpp"

namespace {

using ams::cli::RunConfig;

// Every Hyperparams field is overridable by a --flag of the same name; flags
// win over the config file, which wins over defaults.
struct HyperFlags {
  std::optional<double> lambda_balance, beta_fusion, eta_sampling, theta_cls, theta_loc_factor,
      dropout_rate, learning_rate;
  std::optional<std::size_t> interp_factor, T, D, D_hidden, C, topk_divisor, phase0_epochs,
      phase_epochs, num_iterations;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--lambda_balance", lambda_balance, "balance weight for the location loss");
    app->add_option("--beta_fusion", beta_fusion, "fusion weight of the second modality");
    app->add_option("--eta_sampling", eta_sampling, "sampling adjustment value");
    app->add_option("--interp_factor", interp_factor, "temporal interpolation factor H");
    app->add_option("--theta_cls", theta_cls, "video-level classification threshold");
    app->add_option("--theta_loc_factor", theta_loc_factor,
                    "factor of avg(CAS) for the localization threshold");
    app->add_option("--T", T, "snippets per video (generation only)");
    app->add_option("--D", D, "feature dimension (generation only)");
    app->add_option("--D_hidden", D_hidden, "hidden width of the backbone");
    app->add_option("--C", C, "number of action categories (generation only)");
    app->add_option("--topk_divisor", topk_divisor, "k = max(1, T/topk_divisor)");
    app->add_option("--dropout_rate", dropout_rate, "training dropout rate");
    app->add_option("--learning_rate", learning_rate, "Adam learning rate");
    app->add_option("--phase0_epochs", phase0_epochs, "epochs of phase zero");
    app->add_option("--phase_epochs", phase_epochs, "epochs per alternating phase");
    app->add_option("--num_iterations", num_iterations, "mutual supervision iterations");
    app->add_option("--seed", seed, "master seed");
  }

  void apply(ams::nn::Hyperparams& h) const {
    if (lambda_balance) h.lambda_balance = *lambda_balance;
    if (beta_fusion) h.beta_fusion = *beta_fusion;
    if (eta_sampling) h.eta_sampling = *eta_sampling;
    if (interp_factor) h.interp_factor = *interp_factor;
    if (theta_cls) h.theta_cls = *theta_cls;
    if (theta_loc_factor) h.theta_loc_factor = *theta_loc_factor;
    if (T) h.T = *T;
    if (D) h.D = *D;
    if (D_hidden) h.hidden_dim = *D_hidden;
    if (C) h.C = *C;
    if (topk_divisor) h.topk_divisor = *topk_divisor;
    if (dropout_rate) h.dropout_rate = *dropout_rate;
    if (learning_rate) h.learning_rate = *learning_rate;
    if (phase0_epochs) h.phase0_epochs = *phase0_epochs;
    if (phase_epochs) h.phase_epochs = *phase_epochs;
    if (num_iterations) h.num_iterations = *num_iterations;
    if (seed) h.seed = *seed;
  }
};

struct ModeFlags {
  std::optional<std::string> config_path, dataset, output_dir, sampling_mode, aggregation_mode,
      supervision_mode, branch_count, sampling_strategy, preset;
  std::optional<bool> use_sampler;
  std::vector<double> iou_thresholds;
  std::optional<std::size_t> ablate_seeds;

  void add_to(CLI::App* app, bool with_ablate_seeds = false, bool with_dataset = true) {
    app->add_option("--config", config_path, "JSON run configuration");
    if (with_dataset) app->add_option("--dataset", dataset, "dataset file");
    app->add_option("--output-dir,-o", output_dir,
                    "output directory (default $AMS_OUTPUT_DIR or .)");
    app->add_option("--sampling_mode", sampling_mode, "adaptive|uniform|random|erase");
    app->add_option("--aggregation_mode", aggregation_mode, "maximum|average|random");
    app->add_option("--supervision_mode", supervision_mode, "mutual|self|none");
    app->add_option("--branch_count", branch_count, "one|dual");
    app->add_option("--sampling_strategy", sampling_strategy, "deterministic|stochastic");
    app->add_option("--use_sampler", use_sampler, "enable the adaptive sampler");
    app->add_option("--thresholds", iou_thresholds, "T-IoU thresholds")->delimiter(',');
    app->add_option("--preset", preset, "Table-III setup preset A..F");
    if (with_ablate_seeds)
      app->add_option("--seeds", ablate_seeds, "number of seeds for the ablation");
  }

  RunConfig build(const HyperFlags& hyper) const {
    RunConfig cfg;
    if (config_path) cfg = ams::cli::load_config(*config_path);
    if (preset) {
      ams::require(preset->size() == 1, "preset must be a single letter A-F");
      ams::cli::apply_preset(cfg, (*preset)[0]);
    }
    hyper.apply(cfg.hyper);
    if (dataset) cfg.dataset_path = *dataset;
    if (output_dir) cfg.output_dir = *output_dir;
    if (sampling_mode) cfg.sampling_mode = ams::io::sampling_mode_from(*sampling_mode);
    if (aggregation_mode)
      cfg.aggregation_mode = ams::io::aggregation_mode_from(*aggregation_mode);
    if (supervision_mode)
      cfg.supervision_mode = ams::io::supervision_mode_from(*supervision_mode);
    if (branch_count) cfg.branch_count = ams::io::branch_count_from(*branch_count);
    if (sampling_strategy) cfg.sampling_strategy = ams::io::strategy_from(*sampling_strategy);
    if (use_sampler) cfg.use_sampler = *use_sampler;
    if (!iou_thresholds.empty()) cfg.iou_thresholds = iou_thresholds;
    if (ablate_seeds) cfg.ablate_seeds = *ablate_seeds;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive mutual supervision for weakly-supervised temporal action localization"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  std::optional<std::string> gen_spec;
  std::string gen_out;
  gen->add_option("--spec", gen_spec, "dataset spec JSON (defaults when omitted)");
  gen->add_option("--out", gen_out, "output dataset file")->required();

  // train
  auto* train = app.add_subcommand("train", "run the full training pipeline");
  HyperFlags train_hyper;
  ModeFlags train_modes;
  train_hyper.add_to(train);
  train_modes.add_to(train);

  // eval
  auto* eval = app.add_subcommand("eval", "fuse, extract proposals, and score a checkpoint");
  std::string eval_checkpoint, eval_dataset;
  HyperFlags eval_hyper;
  ModeFlags eval_modes;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval_hyper.add_to(eval);
  eval_modes.add_to(eval, /*with_ablate_seeds=*/false, /*with_dataset=*/false);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the ablation setups over several seeds");
  HyperFlags ablate_hyper;
  ModeFlags ablate_modes;
  ablate_hyper.add_to(ablate);
  ablate_modes.add_to(ablate, /*with_ablate_seeds=*/true);

  // dump-cas
  auto* dump = app.add_subcommand("dump-cas", "dump per-snippet CAS curves and sampler state");
  std::string dump_checkpoint, dump_dataset, dump_video;
  int dump_class = -1;
  HyperFlags dump_hyper;
  ModeFlags dump_modes;
  dump->add_option("--checkpoint", dump_checkpoint, "checkpoint file")->required();
  dump->add_option("--dataset", dump_dataset, "dataset file")->required();
  dump->add_option("--video-id", dump_video, "video id to dump")->required();
  dump->add_option("--class", dump_class, "class channel (default: top predicted)");
  dump_hyper.add_to(dump);
  dump_modes.add_to(dump, /*with_ablate_seeds=*/false, /*with_dataset=*/false);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return ams::cli::cmd_generate(gen_spec, gen_out);
    if (train->parsed()) return ams::cli::cmd_train(train_modes.build(train_hyper));
    if (eval->parsed())
      return ams::cli::cmd_eval(eval_checkpoint, eval_dataset, eval_modes.build(eval_hyper));
    if (ablate->parsed()) return ams::cli::cmd_ablate(ablate_modes.build(ablate_hyper));
    if (dump->parsed())
      return ams::cli::cmd_dump_cas(dump_checkpoint, dump_dataset, dump_video, dump_class,
                                    dump_modes.build(dump_hyper));
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E2: " << e.what() << "\n";
    return 2;
  } catch (const ams::ValidationError& e) {
    std::cerr << "E2: " << e.what() << "\n";
    return 2;
  } catch (const ams::DataError& e) {
    std::cerr << "E3: " << e.what() << "\n";
    return 3;
  } catch (const ams::Error& e) {  // numeric failures and contract violations
    std::cerr << "E4: " << e.what() << "\n";
    return 4;
  }
}
