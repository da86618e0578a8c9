// mobcast command-line front end.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mobcast/config.hpp"
#include "mobcast/dataset_io.hpp"
#include "mobcast/evaluation.hpp"
#include "mobcast/graph.hpp"
#include "mobcast/memory.hpp"
#include "mobcast/synthetic.hpp"
#include "mobcast/trajectory.hpp"

namespace {

using namespace mobcast;

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T require(const std::optional<T>& value, std::string_view what,
          std::string_view tag) {
  if (!value) throw CLI::ValidationError(fmt::format("unknown {} '{}'", what, tag));
  return *value;
}

struct PreprocessArgs {
  std::string input;
  std::string format = "canonical-jsonl";
  std::string profile = "foursquare";
  std::string out;
  std::string tz;
  std::string ids = "str";
  std::string session_mode;
  std::string config;
};

int run_preprocess(const PreprocessArgs& a) {
  ProcessingProfile profile = require(profile_by_name(a.profile), "profile", a.profile);
  if (!a.session_mode.empty()) {
    profile.session_mode =
        require(parse_session_mode(a.session_mode), "session mode", a.session_mode);
  }
  std::optional<UtcOffset> tz;
  if (!a.config.empty()) tz = load_config(a.config).timezone;
  if (!a.tz.empty()) tz = require(parse_utc_offset(a.tz), "timezone", a.tz);
  if (!tz) tz = profile.daily_sessions ? profile.isp.tz : UtcOffset{0};

  const LoadResult loaded = load_checkins(a.input, a.format);
  const PreparedDataset dataset =
      preprocess(loaded.records, profile, *tz, require(parse_id_mode(a.ids), "id mode", a.ids));
  write_dataset(a.out, dataset);
  const auto& s = dataset.stats;
  fmt::print("lines={} malformed={} users={} trajectories={} locations={} days={} "
             "records={}\n",
             loaded.lines, loaded.malformed, s.users, s.trajectories, s.locations,
             s.days, s.records);
  fmt::print("split: train={} validation={} test={}\n", dataset.split.train.size(),
             dataset.split.validation.size(), dataset.split.test.size());
  return 0;
}

struct EvalArgs {
  std::string dataset;
  std::string city = "city";
  std::string method = "agentmove";
  std::vector<std::string> ablations;
  std::string provider = "mock:frequency-oracle";
  std::size_t sample_n = 200;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::optional<std::size_t> stop_after;
};

int run_eval(const EvalArgs& a) {
  RunSpec spec;
  spec.dataset_dir = a.dataset;
  spec.city = a.city;
  spec.methods.clear();
  for (const auto& tag : split_list(a.method, ',')) {
    spec.methods.push_back(require(parse_method(tag), "method", tag));
  }
  spec.ablations.clear();
  for (const auto& tag : a.ablations.empty() ? std::vector<std::string>{"all"}
                                             : a.ablations) {
    spec.ablations.push_back(require(parse_ablation(tag), "ablation", tag));
  }
  spec.provider_tag = a.provider;
  spec.sample_n = a.sample_n;
  spec.seed = a.seed;
  spec.out_dir = a.out;
  if (!a.config.empty()) spec.config = load_config(a.config);
  spec.stop_after = a.stop_after;

  const EvaluationOutcome outcome = run_evaluation(spec);
  if (outcome.interrupted) {
    fmt::print("stopped early; checkpoint kept in {}\n", a.out);
    return 3;
  }
  for (const auto& run : outcome.runs) {
    fmt::print("{:<40} acc@1={:.4f} acc@5={:.4f} ndcg@5={:.4f} n={} parse_failed={} "
               "errors={}\n",
               run_key(run.city, run.method, run.ablation), run.metrics.acc_at_1,
               run.metrics.acc_at_5, run.metrics.ndcg_at_5, run.metrics.n_instances,
               run.metrics.n_parse_failed, run.n_errors);
  }
  return 0;
}

int run_report(const std::string& runs_dir, bool bias) {
  const auto runs = collect_runs(runs_dir);
  if (runs.empty()) throw std::runtime_error("no metrics.json found under " + runs_dir);
  for (const auto& run : runs) {
    fmt::print("{:<12} {:<10} {:<16} acc@1={:.4f} acc@5={:.4f} ndcg@5={:.4f} n={}\n",
               run.city, run.method, run.ablation.empty() ? "-" : run.ablation,
               run.metrics.acc_at_1, run.metrics.acc_at_5, run.metrics.ndcg_at_5,
               run.metrics.n_instances);
  }
  if (!bias) return 0;
  const BiasReportFiles report = build_bias_report(runs);
  const std::filesystem::path dir(runs_dir);
  write_text_atomic(dir / "bias.csv", report.csv);
  write_text_atomic(dir / "bias.json", report.json.dump(2) + "\n");
  fmt::print("\n{}", report.csv);
  return 0;
}

struct SynthArgs {
  SynthOptions options;
  std::string format = "canonical-jsonl";
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const InputFormat format = require(parse_input_format(a.format), "format", a.format);
  const SyntheticDataset data = generate_synthetic(a.options);
  std::ostringstream text;
  write_checkins(text, data.records, format);
  if (a.out.empty() || a.out == "-") {
    std::cout << text.str();
  } else {
    write_text_atomic(a.out, text.str());
    fmt::print(stderr, "wrote {} stays to {}\n", data.records.size(), a.out);
  }
  return 0;
}

int run_memory_dump(const std::string& dataset_dir, const std::string& user,
                    const std::string& config_path) {
  const RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
  const LoadedDataset dataset = read_dataset(dataset_dir);
  InstanceOptions io;
  io.context_k = config.context_k;
  io.history_len = config.history_len;
  io.sample_n = std::numeric_limits<std::size_t>::max();
  io.min_test_sessions = dataset.profile.min_test_sessions;
  io.max_test_sessions = dataset.profile.max_test_sessions;
  MemoryOptions mo;
  mo.top_k = config.memory_top_k;
  mo.per_session_transitions = config.per_session_transitions;
  mo.prompt_budget_chars = config.memory_budget;

  MemoryPool pool;
  for (const auto& instance : build_test_instances(dataset.split, io)) {
    if (user.empty() || instance.user_id == user) {
      pool.put(instance.user_id, build_memory(instance, dataset.catalog, mo));
    }
  }
  if (!user.empty() && !pool.contains(user)) {
    throw std::runtime_error(fmt::format("user '{}' has no test instance", user));
  }
  std::cout << (user.empty() ? pool.dump_all() : pool.dump(user)).dump(2) << '\n';
  return 0;
}

int run_graph_build(const std::string& dataset_dir, const std::string& out) {
  const LoadedDataset dataset = read_dataset(dataset_dir);
  const TransitionGraph graph = init_from_training(dataset.split.train, &dataset.catalog);
  graph.save_tsv(out);
  fmt::print("nodes={} edges={}\n", graph.node_count(), graph.edge_count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-location prediction pipeline: preprocessing, prompting, evaluation"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* preprocess_cmd = app.add_subcommand("preprocess", "Sessionize, filter and split check-ins");
  preprocess_cmd->add_option("--input", pre.input, "Raw check-in file")->required();
  preprocess_cmd->add_option("--format", pre.format,
                             "foursquare-tsv | isp-jsonl | canonical-jsonl")
      ->capture_default_str();
  preprocess_cmd->add_option("--profile", pre.profile, "foursquare | isp")
      ->capture_default_str();
  preprocess_cmd->add_option("--out", pre.out, "Output dataset directory")->required();
  preprocess_cmd->add_option("--tz", pre.tz, "UTC offset for local-time views, e.g. +09:00");
  preprocess_cmd->add_option("--ids", pre.ids, "str | int")->capture_default_str();
  preprocess_cmd->add_option("--session-mode", pre.session_mode, "anchored | gap");
  preprocess_cmd->add_option("--config", pre.config, "Config file (timezone key)");

  EvalArgs ev;
  std::size_t stop_after = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Run predictions and score them");
  eval_cmd->add_option("--dataset", ev.dataset, "Preprocessed dataset directory")->required();
  eval_cmd->add_option("--city", ev.city, "City label for reports")->capture_default_str();
  eval_cmd->add_option("--method", ev.method,
                       "Comma list of agentmove, llm-zs, llm-mob, markov")
      ->capture_default_str();
  eval_cmd->add_option("--ablation", ev.ablations,
                       "agentmove parts: base, all, or a list of mem,world,col "
                       "(repeatable)");
  eval_cmd->add_option("--provider", ev.provider,
                       "openai | mock:frequency-oracle | mock:echo=TEXT | mock:canned=FILE")
      ->capture_default_str();
  eval_cmd->add_option("--sample-n", ev.sample_n, "Test instances to sample")
      ->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "Sampling seed")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--config", ev.config, "Config file");
  auto* stop_opt = eval_cmd->add_option(
      "--stop-after", stop_after, "Stop after N new predictions (checkpoint only)");

  std::string runs_dir;
  bool bias = false;
  auto* report_cmd = app.add_subcommand("report", "Summarize metrics.json files");
  report_cmd->add_option("--runs", runs_dir, "Directory searched for metrics.json")
      ->required();
  report_cmd->add_flag("--bias", bias, "Write cross-city bias.csv and bias.json");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Generate an explore/return dataset");
  synth_cmd->add_option("--users", syn.options.users)->capture_default_str();
  synth_cmd->add_option("--days", syn.options.days)->capture_default_str();
  synth_cmd->add_option("--seed", syn.options.seed)->capture_default_str();
  synth_cmd->add_option("--locations", syn.options.locations)->capture_default_str();
  synth_cmd->add_option("--return-prob", syn.options.return_prob)->capture_default_str();
  synth_cmd->add_option("--stays-per-day", syn.options.stays_per_day)
      ->capture_default_str();
  synth_cmd->add_option("--format", syn.format, "canonical-jsonl | isp-jsonl | foursquare-tsv")
      ->capture_default_str();
  synth_cmd->add_option("--out", syn.out, "Output file (default stdout)");

  std::string mem_dataset, mem_user, mem_config;
  auto* memory_cmd = app.add_subcommand("memory", "Inspect user memories");
  memory_cmd->require_subcommand(1);
  auto* dump_cmd = memory_cmd->add_subcommand("dump", "Print memory entries as JSON");
  dump_cmd->add_option("--dataset", mem_dataset)->required();
  dump_cmd->add_option("--user", mem_user, "Only this user");
  dump_cmd->add_option("--config", mem_config);

  std::string graph_dataset, graph_out = "graph.tsv";
  auto* graph_cmd = app.add_subcommand("graph", "Transition graph tools");
  graph_cmd->require_subcommand(1);
  auto* build_cmd = graph_cmd->add_subcommand("build", "Build from the train split");
  build_cmd->add_option("--dataset", graph_dataset)->required();
  build_cmd->add_option("--out", graph_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*preprocess_cmd) return run_preprocess(pre);
    if (*eval_cmd) {
      if (*stop_opt) ev.stop_after = stop_after;
      return run_eval(ev);
    }
    if (*report_cmd) return run_report(runs_dir, bias);
    if (*synth_cmd) return run_synth(syn);
    if (*dump_cmd) return run_memory_dump(mem_dataset, mem_user, mem_config);
    if (*build_cmd) return run_graph_build(graph_dataset, graph_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    fmt::print(stderr, "mobcast: error: {}\n", e.what());
    return 1;
  }
  return 0;
}
