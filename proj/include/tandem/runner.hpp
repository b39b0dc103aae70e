#pragma once

// Experiment orchestration: disparity-setting presets, per-seed pipelines
// (corpora -> pretraining -> tandem RL -> checkpoint evaluation), aggregate
// reporting, and the command-line front end.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tandem/metrics.hpp"
#include "tandem/model.hpp"
#include "tandem/tasks.hpp"
#include "tandem/train.hpp"

namespace tandem {

enum class Setting { Skill, SkillAndLanguage, Language };

std::string setting_name(Setting s);

struct ExperimentConfig {
    Setting setting = Setting::Skill;
    std::string name = "skill";  // output directory name; presets may share a Setting

    std::string senior_dialect;
    std::string junior_dialect;
    bool senior_uses_jargon = true;  // specialist senior vs plain base senior

    // Markers whose disappearance the experiment watches (informational; the
    // metrics file always carries jargon rate and the full dialect mix).
    std::vector<std::string> tracked_markers;

    int train_problems = 2000;
    int test_problems = 500;
    DifficultyMix difficulty;

    // Pretraining corpus recipe. The senior sees every training problem; a
    // minority of its examples swap in the "minor" rendering (plain
    // same-dialect for jargon seniors, junior-dialect for cross-dialect
    // settings). Greedy decoding still follows the dominant style everywhere,
    // but the minor mode has to be competent, not just reachable: after the
    // style flips mid-training, accuracy lands wherever that mode was left.
    // The junior is made weaker by subsampling its problems.
    double senior_jargon_fraction = 0.8;
    double senior_minor_fraction = 0.2;
    double junior_corpus_fraction = 0.4;
    int senior_pretrain_epochs = 20;
    int junior_pretrain_epochs = 12;
    double pretrain_learning_rate = 1.0;

    ModelConfig model;
    TrainConfig train;
    TandemConfig tandem;

    std::vector<uint64_t> seeds = {1, 2, 3};

    void validate() const;
};

// Built-in presets: "skill", "skill_language", "language", and "ablation"
// (the skill preset rerun with handoffs disabled, p=0 fixed-senior).
ExperimentConfig preset_config(const std::string& preset);
std::vector<std::string> preset_names();

// key = value lines, '#' comments. Keys use the conventional hyperparameter
// names (learning_rate, effective_batch_size, max_output_length, ...);
// unknown keys are errors.
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string config_snapshot(const ExperimentConfig& cfg);

struct SeedOutcome {
    uint64_t seed = 0;
    std::filesystem::path dir;
    bool failed = false;
    std::string error;
    std::vector<MetricRecord> metrics;        // one row per checkpoint
    MetricRecord junior_baseline;             // frozen junior evaluated solo
    std::vector<ProbeRecord> probes;
};

struct RunManifest {
    std::string setting;
    std::string revision;
    std::filesystem::path root;               // <out>/<name>
    std::vector<SeedOutcome> seeds;
};

// Runs the full pipeline for every configured seed under <out_root>/<name>/
// seed_<k>/, writing corpora, models, checkpoints, logs, metrics and a
// manifest. A seed that throws leaves its partial outputs plus a FAILED
// marker file and is reported in the manifest; the other seeds still run.
RunManifest reproduce_setting(const ExperimentConfig& cfg,
                              const std::filesystem::path& out_root);

// Post-run assertions for `reproduce --check`: threshold checks appropriate
// to the preset (jargon collapse, language shift, or ablation stability).
// Returns human-readable failure strings; empty means pass.
std::vector<std::string> check_setting(const ExperimentConfig& cfg, const RunManifest& manifest);

// Aggregates seed_*/metrics.csv under a setting directory into per-update
// mean/min/max columns plus the junior baseline band.
std::string aggregate_report(const std::filesystem::path& setting_dir);

// Resolves the output root: --out flag if given, else $TANDEM_OUT, else "out".
std::filesystem::path resolve_out_root(const std::string& flag_value);

int cli(int argc, char** argv);

}  // namespace tandem
