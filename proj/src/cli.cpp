#include "setpred/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "setpred/config.hpp"
#include "setpred/datagen.hpp"
#include "setpred/gradcheck.hpp"
#include "setpred/io.hpp"
#include "setpred/trainer.hpp"

namespace setpred {

namespace {

using ordered_json = nlohmann::ordered_json;

// Flags are collected as raw strings and funneled through apply_kv so the
// command line and the config file share one parser and one error message.
class FlagSet {
 public:
  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    values_.emplace_back();
    bindings_.push_back({cmd->add_option(flag, values_.back(), help), key, &values_.back()});
  }

  // File values first, then flags, so flags win.
  void apply(RunConfig& cfg) const {
    for (const auto& b : bindings_)
      if (b.opt->count() > 0) apply_kv(cfg, b.key, *b.value);
  }

 private:
  struct Binding {
    CLI::Option* opt;
    std::string key;
    const std::string* value;
  };
  std::deque<std::string> values_;
  std::vector<Binding> bindings_;
};

DetectOrder order_from_string(const std::string& s) {
  if (s == "placement") return DetectOrder::placement;
  if (s == "sorted_x") return DetectOrder::sorted_x;
  if (s == "shuffled") return DetectOrder::shuffled;
  throw ConfigError("unknown order: " + s);
}

// Strips a trailing ".json" so sibling artifacts share the checkpoint's stem.
std::string stem_of(const std::string& path) {
  const std::string suffix = ".json";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

std::string perm_to_string(const std::vector<std::size_t>& perm) {
  std::string out;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i) out += "-";
    out += std::to_string(perm[i]);
  }
  return out;
}

RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig cfg;
  for (const auto& [key, value] : ckpt.config) apply_kv(cfg, key, value);
  return cfg;
}

int cmd_gen(const RunConfig& cfg, const std::string& out_path) {
  Dataset data;
  if (cfg.task == "tagging") {
    data = gen_multilabel(cfg.n, cfg.num_labels, cfg.seed);
  } else if (cfg.task == "detect") {
    DetectCfg dc;
    dc.n = cfg.n;
    dc.min_objects = cfg.min_objects;
    dc.max_objects = cfg.max_objects;
    dc.overlap_level = cfg.overlap;
    dc.order = order_from_string(cfg.order);
    dc.seed = cfg.seed;
    data = gen_toy_detection(dc);
  } else if (cfg.task == "captcha") {
    data = gen_captcha(cfg.n, cfg.scene_digits, cfg.seed);
  } else {
    throw ConfigError("unknown task: " + cfg.task);
  }
  write_jsonl(data, out_path);
  std::cout << "wrote " << data.size() << " instances to " << out_path << "\n";
  return 0;
}

void write_perms_csv(const PermutationHistogram& hist, std::size_t M,
                     const std::string& path) {
  std::ostringstream out;
  out << "instance_id,lehmer_index,permutation,count,total\n";
  for (const auto& [id, entry] : hist.per_instance)
    for (const auto& [idx, count] : entry.counts)
      out << id << "," << idx << "," << perm_to_string(lehmer_decode(idx, M)) << ","
          << count << "," << entry.total << "\n";
  write_text_file(path, out.str());
}

int cmd_train(const RunConfig& cfg, const std::string& data_path,
              const std::string& out_path) {
  validate_config(cfg);
  const Dataset raw = read_jsonl(data_path);
  if (raw.empty()) throw ConfigError("train: dataset is empty: " + data_path);
  const HeadLayout layout = config_layout(cfg);
  const std::vector<TrainInstance> instances = prepare_instances(raw, layout);

  std::vector<std::size_t> widths;
  widths.push_back(instances.front().input.size());
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(layout.output_dim());
  Mlp net(widths, cfg.seed);

  const std::string hash = config_hash(cfg);
  const std::string stem = stem_of(out_path);
  EpochCallback per_epoch;
  if (cfg.checkpoint_every > 0) {
    per_epoch = [&](std::size_t epoch, const Mlp& snapshot) {
      if ((epoch + 1) % cfg.checkpoint_every != 0) return;
      Checkpoint ck{layout, snapshot, config_kv(cfg), hash};
      save_checkpoint(ck, stem + ".epoch" + std::to_string(epoch + 1) + ".json");
    };
  }

  const TrainResult res = train(config_scenario(cfg), instances, net, layout,
                                config_train(cfg), config_loss(cfg), per_epoch);

  save_checkpoint({layout, net, config_kv(cfg), hash}, out_path);
  write_text_file(stem + ".runlog.csv", res.log.to_csv(hash));
  if (config_scenario(cfg) == Scenario::learned_perm)
    write_perms_csv(res.hist, layout.M, stem + ".perms.csv");

  std::cout << "trained " << cfg.epochs << " epochs on " << instances.size()
            << " instances";
  if (!res.log.epochs.empty())
    std::cout << ", final mean loss " << fmt_double(res.log.epochs.back().mean_total);
  std::cout << " (" << fmt_double(res.log.wall_seconds) << " s)\n"
            << "checkpoint: " << out_path << "\n";
  return 0;
}

int cmd_eval(const Checkpoint& ckpt, const RunConfig& cfg, const std::string& data_path,
             const std::string& out_prefix) {
  validate_config(cfg);
  const Dataset raw = read_jsonl(data_path);
  const std::vector<TrainInstance> instances = prepare_instances(raw, ckpt.layout);
  const EvalReport report = evaluate(ckpt.net, instances, ckpt.layout,
                                     config_inference(cfg), cfg.iou_thresh);
  const std::string hash = config_hash(cfg);
  std::cout << "config_hash," << hash << "\n";
  for (const auto& [name, value] : report.rows())
    std::cout << name << "," << fmt_double(value) << "\n";
  if (!out_prefix.empty()) {
    write_report_csv(report, hash, out_prefix + ".csv");
    write_report_json(report, hash, out_prefix + ".json");
  }
  return 0;
}

int cmd_infer(const Checkpoint& ckpt, const RunConfig& cfg, const std::string& data_path,
              const std::string& out_path) {
  validate_config(cfg);
  const Dataset raw = read_jsonl(data_path);
  const std::vector<TrainInstance> instances = prepare_instances(raw, ckpt.layout);
  const InferenceConfig icfg = config_inference(cfg);

  std::ostringstream lines;
  for (const TrainInstance& inst : instances) {
    const InferredSet pred = infer_instance(ckpt.net, inst, ckpt.layout, icfg);
    ordered_json row;
    row["id"] = inst.id;
    row["m_star"] = pred.m_star;
    ordered_json elems = ordered_json::array();
    for (std::size_t i = 0; i < pred.m_star; ++i) {
      ordered_json el;
      if (ckpt.layout.state_dim == 0) {
        el["label"] = pred.labels[i];
      } else {
        const AABox& b = pred.boxes[i];
        el["box"] = {b.x1, b.y1, b.x2, b.y2};
      }
      el["score"] = pred.scores[i];
      elems.push_back(std::move(el));
    }
    row["elements"] = std::move(elems);
    lines << row.dump() << "\n";
  }
  std::cout << lines.str();
  if (!out_path.empty()) write_text_file(out_path, lines.str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, double tolerance) {
  const std::vector<GradCheckResult> results = run_gradcheck_suite(seed, trials);
  bool ok = true;
  std::cout << "head,max_rel_err,trials\n";
  for (const GradCheckResult& r : results) {
    std::cout << r.name << "," << fmt_double(r.max_rel_err) << "," << r.trials << "\n";
    ok = ok && r.max_rel_err < tolerance;
  }
  std::cout << (ok ? "gradcheck ok" : "gradcheck FAILED") << " (tolerance "
            << fmt_double(tolerance) << ")\n";
  return ok ? 0 : 3;
}

// Rebuilds the histogram from the raw counts CSV written at training time.
PermutationHistogram read_perms_csv(const std::string& path, std::size_t& M_out) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "instance_id,lehmer_index,permutation,count,total")
    throw FormatError(path + ": missing permutation CSV header");
  PermutationHistogram hist;
  M_out = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id_s, lehmer_s, perm_s, count_s, total_s;
    if (!std::getline(row, id_s, ',') || !std::getline(row, lehmer_s, ',') ||
        !std::getline(row, perm_s, ',') || !std::getline(row, count_s, ',') ||
        !std::getline(row, total_s))
      throw FormatError(path + ":" + std::to_string(line_no) + ": short row");
    try {
      const std::uint64_t id = std::stoull(id_s);
      const std::uint64_t lehmer = std::stoull(lehmer_s);
      const std::uint64_t count = std::stoull(count_s);
      const std::size_t M =
          1 + static_cast<std::size_t>(std::count(perm_s.begin(), perm_s.end(), '-'));
      if (M_out == 0) M_out = M;
      if (M != M_out)
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": inconsistent permutation length");
      PermutationHistogram::Entry& e = hist.per_instance[id];
      e.counts[lehmer] += count;
      e.total += count;
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad numeric field");
    }
  }
  if (M_out == 0) throw FormatError(path + ": no permutation rows");
  return hist;
}

int cmd_perms_report(const std::string& run_path, std::size_t k,
                     const std::string& out_path) {
  const std::string suffix = ".perms.csv";
  std::string csv_path = run_path;
  if (csv_path.size() <= suffix.size() ||
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) != 0)
    csv_path = stem_of(run_path) + suffix;

  std::size_t M = 0;
  const PermutationHistogram hist = read_perms_csv(csv_path, M);
  std::ostringstream out;
  out << "instance_id,lehmer_index,permutation,weight\n";
  for (const DominantPerm& d : dominant_permutations(hist, k, M))
    out << d.instance_id << "," << d.lehmer << "," << perm_to_string(d.perm) << ","
        << fmt_double(d.weight) << "\n";
  // Aggregate rows: counts merged across every instance of the run.
  for (const DominantPerm& d : global_dominant_permutations(hist, k, M))
    out << "*," << d.lehmer << "," << perm_to_string(d.perm) << ","
        << fmt_double(d.weight) << "\n";
  std::cout << out.str();
  if (!out_path.empty()) write_text_file(out_path, out.str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"feed-forward set prediction: data generation, training, evaluation"};
  app.require_subcommand(1);

  // gen
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset (JSONL)");
  std::string gen_out, gen_config;
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--config", gen_config, "key=value config file");
  FlagSet gen_flags;
  gen_flags.add(gen, "--task", "task", "tagging | detect | captcha");
  gen_flags.add(gen, "--n", "n", "number of instances");
  gen_flags.add(gen, "--seed", "seed", "generation seed");
  gen_flags.add(gen, "--num-labels", "num_labels", "tagging: label vocabulary size");
  gen_flags.add(gen, "--max-objects", "max_objects", "detect: max objects per image");
  gen_flags.add(gen, "--min-objects", "min_objects", "detect: min objects per image");
  gen_flags.add(gen, "--overlap", "overlap", "detect: max allowed pairwise IoU");
  gen_flags.add(gen, "--order", "order", "detect: placement | sorted_x | shuffled");
  gen_flags.add(gen, "--scene-digits", "scene_digits", "captcha: digits in the scene");

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "train a network, write a checkpoint");
  std::string train_config, train_data, train_out;
  train_cmd->add_option("--config", train_config, "key=value config file");
  train_cmd->add_option("--data", train_data, "training JSONL path")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  FlagSet train_flags;
  train_flags.add(train_cmd, "--task", "task", "tagging | detect | captcha");
  train_flags.add(train_cmd, "--scenario", "scenario", "1 | 2 | 3");
  train_flags.add(train_cmd, "--max-card", "max_card", "output slots M");
  train_flags.add(train_cmd, "--num-labels", "num_labels",
                  "tagging: label vocabulary size (must equal --max-card)");
  train_flags.add(train_cmd, "--hidden", "hidden", "hidden widths, comma separated");
  train_flags.add(train_cmd, "--card", "card", "categorical | poisson | negbin");
  train_flags.add(train_cmd, "--lr", "lr", "learning rate");
  train_flags.add(train_cmd, "--momentum", "momentum", "SGD momentum");
  train_flags.add(train_cmd, "--weight-decay", "weight_decay", "decay gamma");
  train_flags.add(train_cmd, "--lr-decay", "lr_decay", "per-epoch lr multiplier");
  train_flags.add(train_cmd, "--dropout", "dropout", "hidden dropout rate");
  train_flags.add(train_cmd, "--epochs", "epochs", "training epochs");
  train_flags.add(train_cmd, "--batch", "batch", "batch size");
  train_flags.add(train_cmd, "--seed", "seed", "run seed");
  train_flags.add(train_cmd, "--checkpoint-every", "checkpoint_every",
                  "epoch interval for intermediate checkpoints (0 = final only)");
  train_flags.add(train_cmd, "--w1", "w1", "smooth-L1 weight");
  train_flags.add(train_cmd, "--w2", "w2", "GIoU loss weight");
  train_flags.add(train_cmd, "--lambda-noobj", "lambda_noobj", "unmatched-slot weight");
  train_flags.add(train_cmd, "--w-state", "w_state", "state-loss scale");

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_out;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "evaluation JSONL path")->required();
  eval_cmd->add_option("--out", eval_out, "report path prefix (writes .csv and .json)");
  FlagSet eval_flags;
  eval_flags.add(eval_cmd, "--mode", "mode", "exact | approx");
  eval_flags.add(eval_cmd, "--U", "u", "unit of hyper-volume");
  eval_flags.add(eval_cmd, "--iou-thresh", "iou_thresh", "detection match threshold");
  eval_flags.add(eval_cmd, "--seed", "seed", "run seed (provenance only)");

  // infer
  CLI::App* infer_cmd = app.add_subcommand("infer", "predict sets for a JSONL file");
  std::string infer_ckpt, infer_data, infer_out;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint path")->required();
  infer_cmd->add_option("--data", infer_data, "input JSONL path")->required();
  infer_cmd->add_option("--out", infer_out, "write predictions here as well");
  FlagSet infer_flags;
  infer_flags.add(infer_cmd, "--mode", "mode", "exact | approx");
  infer_flags.add(infer_cmd, "--U", "u", "unit of hyper-volume");

  // gradcheck
  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every loss head");
  std::uint64_t grad_seed = 0;
  std::size_t grad_trials = 20;
  double grad_tol = 1e-4;
  grad_cmd->add_option("--seed", grad_seed, "sampling seed");
  grad_cmd->add_option("--trials", grad_trials, "random points per head");
  grad_cmd->add_option("--tolerance", grad_tol, "max allowed relative error");

  // perms-report
  CLI::App* perms_cmd = app.add_subcommand(
      "perms-report", "dominant sampled permutations of a scenario-2 run");
  std::string perms_run, perms_out;
  std::size_t perms_k = 3;
  perms_cmd->add_option("--run", perms_run, "checkpoint path or .perms.csv path")
      ->required();
  perms_cmd->add_option("--k", perms_k, "permutations reported per instance");
  perms_cmd->add_option("--out", perms_out, "write the report here as well");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg;
      if (!gen_config.empty()) cfg = parse_config_file(gen_config);
      gen_flags.apply(cfg);
      return cmd_gen(cfg, gen_out);
    }
    if (train_cmd->parsed()) {
      RunConfig cfg;
      if (!train_config.empty()) cfg = parse_config_file(train_config);
      train_flags.apply(cfg);
      return cmd_train(cfg, train_data, train_out);
    }
    if (eval_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      RunConfig cfg = config_from_checkpoint(ckpt);
      eval_flags.apply(cfg);
      return cmd_eval(ckpt, cfg, eval_data, eval_out);
    }
    if (infer_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(infer_ckpt);
      RunConfig cfg = config_from_checkpoint(ckpt);
      infer_flags.apply(cfg);
      return cmd_infer(ckpt, cfg, infer_data, infer_out);
    }
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_seed, grad_trials, grad_tol);
    if (perms_cmd->parsed()) return cmd_perms_report(perms_run, perms_k, perms_out);
    std::cerr << "error: no command\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace setpred
