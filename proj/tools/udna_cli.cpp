#include <string>
#include <vector>

#include <CLI11.hpp>

#include "udna/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Decentralized gradient-tracking optimization workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::string out_dir = ".";
  std::vector<std::string> presets;
  double threshold = 1e-4;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Execute one configured run");
  run_cmd->add_option("--config", config_path, "Run configuration (JSON)")
      ->required();
  run_cmd->add_option("--out-dir", out_dir, "Directory for output files");

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run several presets on the same problem and rank them");
  compare_cmd->add_option("--config", config_path, "Base configuration")
      ->required();
  compare_cmd
      ->add_option("--presets", presets,
                   "Preset names, comma separated (name or name:power)")
      ->required()
      ->delimiter(',');
  compare_cmd->add_option("--threshold", threshold,
                          "Optimality error target for the ranking");
  compare_cmd->add_option("--out-dir", out_dir,
                          "Directory for output files");

  CLI::App* diag_cmd = app.add_subcommand(
      "diag", "Verify descent and witness inequalities on a trace");
  diag_cmd->add_option("--trace", trace_path, "Trace CSV from a run")
      ->required();
  diag_cmd->add_option("--config", config_path, "Config of that run")
      ->required();
  diag_cmd->add_option("--out-dir", out_dir, "Directory for output files");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return udna::cmd_run(config_path, out_dir);
  if (compare_cmd->parsed()) {
    return udna::cmd_compare(config_path, presets, threshold, out_dir);
  }
  return udna::cmd_diag(trace_path, config_path, out_dir);
}
