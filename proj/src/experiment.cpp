#include "cbd/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbd/rng.hpp"

namespace cbd {

namespace {

constexpr uint64_t kAgentStream = 0x6167656eull;
constexpr uint64_t kDecodeStream = 0x6465636full;
constexpr uint64_t kStudentStream = 0x73747564ull;
constexpr uint64_t kNoiseStream = 0x6e6f6973'3263ull;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Recipe {
  std::string kind;  // cbd | gcbd | bd11 | bd12 | bd22 | ens-distill | noised
  int n_agents = 2;
};

Recipe parse_recipe(const std::string& tag, int num_agents) {
  Recipe r;
  if (tag == "cbd") {
    r.kind = "cbd";
    r.n_agents = 2;
  } else if (tag.rfind("gcbd", 0) == 0) {
    r.kind = "gcbd";
    r.n_agents = num_agents;
    auto colon = tag.find(':');
    if (colon != std::string::npos) r.n_agents = std::stoi(tag.substr(colon + 1));
    if (r.n_agents < 2) throw ConfigError("gcbd needs at least 2 agents");
  } else if (tag == "bd11") {
    r.kind = tag;
    r.n_agents = 1;
  } else if (tag == "bd12" || tag == "bd22") {
    r.kind = tag;
    r.n_agents = 2;
  } else if (tag == "ens-distill") {
    r.kind = tag;
    r.n_agents = std::max(2, num_agents);
  } else if (tag == "noised") {
    r.kind = tag;
    r.n_agents = 1;
  } else {
    throw ConfigError("unknown recipe: " + tag);
  }
  return r;
}

void write_config_echo(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "vocab_size = " << cfg.bench.vocab_size << '\n'
      << "sentences_per_side = " << cfg.bench.sentences_per_side << '\n'
      << "test_size = " << cfg.bench.test_size << '\n'
      << "swap_prob = " << fmt_exact(cfg.bench.swap_prob) << '\n'
      << "zipf_exponent = " << fmt_exact(cfg.bench.zipf_exponent) << '\n'
      << "min_len = " << cfg.bench.min_len << '\n'
      << "max_len = " << cfg.bench.max_len << '\n'
      << "successor_pool = " << cfg.bench.successor_pool << '\n'
      << "lm_weight = " << fmt_exact(cfg.agent.lm_weight) << '\n'
      << "reorder_window = " << cfg.agent.reorder_window << '\n'
      << "lm_order = " << cfg.agent.lm_order << '\n'
      << "em_iterations = " << cfg.agent.em_iterations << '\n'
      << "num_agents = " << cfg.num_agents << '\n'
      << "ibt_rounds = " << cfg.ibt_rounds << '\n'
      << "ibt_subsample = " << cfg.ibt_subsample << '\n'
      << "decode = " << to_string(cfg.decode.strategy) << '\n'
      << "beam = " << cfg.decode.beam_size << '\n'
      << "temp = " << fmt_exact(cfg.decode.temperature) << '\n'
      << "top_k = " << cfg.decode.top_k << '\n'
      << "top_p = " << fmt_exact(cfg.decode.top_p) << '\n'
      << "max_out_len = " << cfg.decode.max_out_len << '\n'
      << "decode_seed = " << cfg.decode.seed << '\n'
      << "recipe = " << cfg.recipe << '\n'
      << "passes = " << cfg.passes << '\n'
      << "noise_drop = " << fmt_exact(cfg.noise.p_drop) << '\n'
      << "noise_swap = " << fmt_exact(cfg.noise.p_swap) << '\n'
      << "noise_blank = " << fmt_exact(cfg.noise.p_blank) << '\n'
      << "recon_sample = " << cfg.recon_sample << '\n';
  out << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
  out << '\n';
}

SeedOutcome run_seed(const ExperimentConfig& cfg, const Recipe& recipe, uint64_t seed,
                     const std::string& seed_dir) {
  SeedOutcome outcome;
  outcome.seed = seed;

  BenchmarkSet bench = generate_language_pair(cfg.bench, seed);
  write_benchmark(bench, seed_dir + "/bench");

  DecodeConfig dc = cfg.decode;
  dc.seed = mix64(seed, kDecodeStream, cfg.decode.seed);

  // Agents: init, then IBT round by round with per-round test BLEU logging.
  std::vector<Agent> agents;
  std::ofstream ibt_log(seed_dir + "/ibt_log.tsv", std::ios::binary);
  ibt_log << "agent\tround\tbleu_s2t\tbleu_t2s\n";
  for (int i = 0; i < recipe.n_agents; ++i) {
    Agent agent = init_agent(bench.mono_s, bench.mono_t,
                             mix64(seed, kAgentStream, static_cast<uint64_t>(i + 1)), cfg.agent,
                             "agent-" + std::to_string(i + 1));
    EvalResult init_eval = evaluate_on_test(agent, bench, dc, cfg.threads);
    ibt_log << agent.id << "\t0\t" << fmt(init_eval.s2t.score) << '\t' << fmt(init_eval.t2s.score)
            << '\n';
    int subsample = std::min(cfg.ibt_subsample, cfg.bench.sentences_per_side);
    for (int r = 1; r <= cfg.ibt_rounds; ++r) {
      agent = ibt_train(agent, bench.mono_s, bench.mono_t, 1, subsample, dc, cfg.threads);
      EvalResult round_eval = evaluate_on_test(agent, bench, dc, cfg.threads);
      ibt_log << agent.id << '\t' << r << '\t' << fmt(round_eval.s2t.score) << '\t'
              << fmt(round_eval.t2s.score) << '\n';
      outcome.ibt_log.push_back({static_cast<double>(r), round_eval.s2t.score,
                                 round_eval.t2s.score});
    }
    save_agent(agent, seed_dir + "/agents/" + agent.id);
    agents.push_back(std::move(agent));
  }

  std::vector<const Agent*> agent_ptrs;
  for (const Agent& a : agents) agent_ptrs.push_back(&a);

  SyntheticCorpus pairs;
  if (recipe.kind == "cbd") {
    pairs = cbd_generate(agents[0], agents[1], bench.mono_s, bench.mono_t, dc, cfg.passes,
                         cfg.threads);
  } else if (recipe.kind == "gcbd") {
    pairs = gcbd_generate(agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.passes, cfg.threads);
  } else if (recipe.kind == "bd11") {
    pairs = bd_generate(BdVariant::BD11, agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.threads);
  } else if (recipe.kind == "bd12") {
    pairs = bd_generate(BdVariant::BD12, agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.threads);
  } else if (recipe.kind == "bd22") {
    pairs = bd_generate(BdVariant::BD22, agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.threads);
  } else if (recipe.kind == "ens-distill") {
    pairs = ensemble_distill(agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.threads);
  } else if (recipe.kind == "noised") {
    pairs = bd_generate(BdVariant::BD11, agent_ptrs, bench.mono_s, bench.mono_t, dc, cfg.threads);
    pairs = apply_target_noise(pairs, cfg.noise, mix64(seed, kNoiseStream));
  }
  write_synthetic(pairs, seed_dir + "/pairs.tsv");

  FitConfig fit;
  fit.lm_order = cfg.agent.lm_order;
  fit.em_iterations = cfg.agent.em_iterations;
  fit.lm_weight = cfg.agent.lm_weight;
  fit.reorder_window = cfg.agent.reorder_window;
  fit.seed = mix64(seed, kStudentStream);
  StudentModel student = supervised_fit(pairs, bench.mono_s.vocab, bench.mono_t.vocab, fit);
  save_student(student, seed_dir + "/student");

  for (const Agent& agent : agents) outcome.evals.push_back(evaluate_on_test(agent, bench, dc, cfg.threads));
  outcome.evals.push_back(evaluate_on_test(student.agent, bench, dc, cfg.threads));

  std::ofstream eval_out(seed_dir + "/eval.tsv", std::ios::binary);
  eval_out << "model\tbleu_s2t\tbleu_t2s\tbleu_avg\n";
  for (const EvalResult& e : outcome.evals)
    eval_out << e.model << '\t' << fmt(e.s2t.score) << '\t' << fmt(e.t2s.score) << '\t'
             << fmt(e.avg()) << '\n';

  DiversityReport div = diversity_report(pairs, bench.mono_s, bench.mono_t, agent_ptrs, dc,
                                         cfg.recon_sample, cfg.threads);
  write_diversity_tsv(div, seed_dir + "/diversity.tsv");

  outcome.ok = true;
  return outcome;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds list must be non-empty");
  if (ibt_rounds < 0) throw ConfigError("ibt_rounds must be >= 0");
  if (ibt_subsample < 1) throw ConfigError("ibt_subsample must be >= 1");
  if (passes < 1) throw ConfigError("passes must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (recon_sample < 1) throw ConfigError("recon_sample must be >= 1");
  decode.validate();
  noise.validate();
  parse_recipe(recipe, num_agents);
}

EvalResult evaluate_on_test(const Agent& agent, const BenchmarkSet& bench, const DecodeConfig& dc,
                            int threads) {
  EvalResult result;
  result.model = agent.id;
  std::vector<Sentence> srcs, refs_t, tgts, refs_s;
  for (const auto& [src, tgt] : bench.test_pairs) {
    srcs.push_back(src);
    refs_t.push_back(tgt);
    tgts.push_back(tgt);
    refs_s.push_back(src);
  }
  std::vector<Sentence> hyp_t = translate_corpus({&agent}, srcs, Direction::S2T, dc, threads);
  std::vector<Sentence> hyp_s = translate_corpus({&agent}, tgts, Direction::T2S, dc, threads);
  result.s2t = corpus_bleu(hyp_t, refs_t);
  result.t2s = corpus_bleu(hyp_s, refs_s);
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Recipe recipe = parse_recipe(cfg.recipe, cfg.num_agents);
  std::filesystem::create_directories(cfg.out_dir);
  write_config_echo(cfg, cfg.out_dir + "/config.txt");

  RunResult result;
  result.config = cfg;
  for (uint64_t seed : cfg.seeds) {
    std::string seed_dir = cfg.out_dir + "/seed" + std::to_string(seed);
    std::filesystem::create_directories(seed_dir);
    SeedOutcome outcome;
    try {
      outcome = run_seed(cfg, recipe, seed, seed_dir);
    } catch (const std::exception& e) {
      outcome.seed = seed;
      outcome.ok = false;
      outcome.error = e.what();
      std::ofstream err(seed_dir + "/error.txt", std::ios::binary);
      err << e.what() << '\n';
    }
    result.seeds.push_back(std::move(outcome));
  }

  std::ofstream report(cfg.out_dir + "/report.tsv", std::ios::binary);
  report << "seed\tmodel\tbleu_s2t\tbleu_t2s\tbleu_avg\n";
  for (const SeedOutcome& outcome : result.seeds) {
    if (!outcome.ok) continue;
    for (const EvalResult& e : outcome.evals)
      report << outcome.seed << '\t' << e.model << '\t' << fmt(e.s2t.score) << '\t'
             << fmt(e.t2s.score) << '\t' << fmt(e.avg()) << '\n';
  }

  // Aggregate summary: per-model means plus per-seed student wins.
  std::ofstream summary(cfg.out_dir + "/summary.txt", std::ios::binary);
  summary << "recipe = " << cfg.recipe << "\n";
  std::map<std::string, std::array<double, 3>> sums;
  std::map<std::string, int> counts;
  int student_wins = 0, ok_seeds = 0;
  for (const SeedOutcome& outcome : result.seeds) {
    if (!outcome.ok) {
      summary << "seed " << outcome.seed << " failed: " << outcome.error << "\n";
      continue;
    }
    ++ok_seeds;
    double best_agent = 0.0, student = 0.0;
    for (const EvalResult& e : outcome.evals) {
      auto& s = sums[e.model];
      s[0] += e.s2t.score;
      s[1] += e.t2s.score;
      s[2] += e.avg();
      counts[e.model] += 1;
      if (e.model == "student") student = e.avg();
      else best_agent = std::max(best_agent, e.avg());
    }
    if (student >= best_agent) ++student_wins;
  }
  summary << "model\tmean_s2t\tmean_t2s\tmean_avg\n";
  for (const auto& [model, s] : sums)
    summary << model << '\t' << fmt(s[0] / counts[model]) << '\t' << fmt(s[1] / counts[model])
            << '\t' << fmt(s[2] / counts[model]) << '\n';
  if (ok_seeds > 0)
    summary << "student >= best agent in " << student_wins << "/" << ok_seeds << " seeds\n";
  return result;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  ConfigMap kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
    };
    trim(key);
    trim(val);
    if (key.empty()) throw ConfigError("config line without key: " + line);
    kv[key] = val;
  }
  return kv;
}

void apply_config(ExperimentConfig& cfg, const ConfigMap& kv) {
  for (const auto& [key, val] : kv) {
    if (key == "vocab_size") cfg.bench.vocab_size = std::stoi(val);
    else if (key == "sentences_per_side") cfg.bench.sentences_per_side = std::stoi(val);
    else if (key == "test_size") cfg.bench.test_size = std::stoi(val);
    else if (key == "swap_prob") cfg.bench.swap_prob = std::stod(val);
    else if (key == "zipf_exponent") cfg.bench.zipf_exponent = std::stod(val);
    else if (key == "min_len") cfg.bench.min_len = std::stoi(val);
    else if (key == "max_len") cfg.bench.max_len = std::stoi(val);
    else if (key == "successor_pool") cfg.bench.successor_pool = std::stoi(val);
    else if (key == "lm_weight") cfg.agent.lm_weight = std::stod(val);
    else if (key == "reorder_window") cfg.agent.reorder_window = std::stoi(val);
    else if (key == "lm_order") cfg.agent.lm_order = std::stoi(val);
    else if (key == "em_iterations") cfg.agent.em_iterations = std::stoi(val);
    else if (key == "num_agents") cfg.num_agents = std::stoi(val);
    else if (key == "ibt_rounds") cfg.ibt_rounds = std::stoi(val);
    else if (key == "ibt_subsample") cfg.ibt_subsample = std::stoi(val);
    else if (key == "decode") cfg.decode.strategy = strategy_from_string(val);
    else if (key == "beam") cfg.decode.beam_size = std::stoi(val);
    else if (key == "temp") cfg.decode.temperature = std::stod(val);
    else if (key == "top_k") cfg.decode.top_k = std::stoi(val);
    else if (key == "top_p") cfg.decode.top_p = std::stod(val);
    else if (key == "max_out_len") cfg.decode.max_out_len = std::stoi(val);
    else if (key == "decode_seed") cfg.decode.seed = std::stoull(val);
    else if (key == "recipe") cfg.recipe = val;
    else if (key == "passes") cfg.passes = std::stoi(val);
    else if (key == "noise_drop") cfg.noise.p_drop = std::stod(val);
    else if (key == "noise_swap") cfg.noise.p_swap = std::stod(val);
    else if (key == "noise_blank") cfg.noise.p_blank = std::stod(val);
    else if (key == "recon_sample") cfg.recon_sample = std::stoi(val);
    else if (key == "threads") cfg.threads = std::stoi(val);
    else if (key == "out_dir") cfg.out_dir = val;
    else if (key == "seeds") {
      cfg.seeds.clear();
      std::istringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) cfg.seeds.push_back(std::stoull(item));
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
}

std::string config_help() {
  return
      "config keys (flat `key = value`; CLI flags override):\n"
      "  vocab_size, sentences_per_side, test_size, swap_prob, zipf_exponent,\n"
      "  min_len, max_len, successor_pool      benchmark generator\n"
      "  lm_weight, reorder_window, lm_order, em_iterations   agent settings\n"
      "  num_agents, ibt_rounds, ibt_subsample                training\n"
      "  decode (greedy|beam|temp|top-k|top-p), beam, temp, top_k, top_p,\n"
      "  max_out_len, decode_seed                             decoding\n"
      "  recipe (cbd|gcbd:n|bd11|bd12|bd22|ens-distill|noised), passes\n"
      "  noise_drop, noise_swap, noise_blank                  target noising\n"
      "  seeds (comma separated), out_dir, threads, recon_sample\n";
}

namespace {

struct RunData {
  std::string dir;
  std::string recipe;
  ConfigMap config;
  // seed -> model -> (s2t, t2s)
  std::map<uint64_t, std::map<std::string, std::pair<double, double>>> evals;
  // seed -> diversity rows (metric/side/fwd/bwd -> value)
  std::map<uint64_t, std::vector<std::array<std::string, 5>>> diversity;
};

RunData load_run(const std::string& dir) {
  RunData run;
  run.dir = dir;
  run.config = parse_config_file(dir + "/config.txt");
  auto it = run.config.find("recipe");
  if (it == run.config.end()) throw IncomparableRuns(dir + " lacks a recipe in config.txt");
  run.recipe = it->second;

  std::ifstream report(dir + "/report.tsv");
  if (!report) throw IncomparableRuns(dir + " has no report.tsv");
  std::string line;
  std::getline(report, line);  // header
  while (std::getline(report, line)) {
    std::istringstream row(line);
    std::string seed, model, s2t, t2s, avg;
    if (!std::getline(row, seed, '\t') || !std::getline(row, model, '\t') ||
        !std::getline(row, s2t, '\t') || !std::getline(row, t2s, '\t') ||
        !std::getline(row, avg, '\t'))
      continue;
    run.evals[std::stoull(seed)][model] = {std::stod(s2t), std::stod(t2s)};
  }

  for (const auto& [seed, models] : run.evals) {
    std::ifstream div(dir + "/seed" + std::to_string(seed) + "/diversity.tsv");
    if (!div) continue;
    std::getline(div, line);
    while (std::getline(div, line)) {
      std::istringstream row(line);
      std::array<std::string, 5> cols;
      for (auto& c : cols)
        if (!std::getline(row, c, '\t')) break;
      run.diversity[seed].push_back(cols);
    }
  }
  return run;
}

const char* kBenchKeys[] = {"vocab_size", "sentences_per_side", "test_size",  "swap_prob",
                            "zipf_exponent", "min_len",        "max_len",    "successor_pool",
                            "seeds"};

}  // namespace

std::string compare_tables(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2) throw IncomparableRuns("need at least two runs to compare");
  std::vector<RunData> runs;
  for (const auto& dir : run_dirs) runs.push_back(load_run(dir));
  for (size_t i = 1; i < runs.size(); ++i) {
    for (const char* key : kBenchKeys) {
      auto a = runs[0].config.find(key), b = runs[i].config.find(key);
      if (a == runs[0].config.end() || b == runs[i].config.end() || a->second != b->second)
        throw IncomparableRuns("runs differ on benchmark setting '" + std::string(key) + "'");
    }
    if (runs[0].evals.size() != runs[i].evals.size())
      throw IncomparableRuns("runs cover different seed sets");
  }

  std::ostringstream out;
  out << "| recipe | mean student s2t | mean student t2s | mean student avg | dup_ratio | "
         "trigram_rate | wins vs "
      << runs[0].recipe << " |\n";
  out << "|---|---|---|---|---|---|---|\n";

  std::vector<std::map<uint64_t, double>> student_avgs(runs.size());
  for (size_t r = 0; r < runs.size(); ++r)
    for (const auto& [seed, models] : runs[r].evals) {
      auto it = models.find("student");
      if (it != models.end()) student_avgs[r][seed] = 0.5 * (it->second.first + it->second.second);
    }

  for (size_t r = 0; r < runs.size(); ++r) {
    double s2t = 0, t2s = 0, dup = 0, tri = 0;
    int n = 0, dup_n = 0;
    for (const auto& [seed, models] : runs[r].evals) {
      auto it = models.find("student");
      if (it == models.end()) continue;
      s2t += it->second.first;
      t2s += it->second.second;
      ++n;
    }
    for (const auto& [seed, rows] : runs[r].diversity) {
      for (const auto& cols : rows) {
        if (cols[0] == "duplicate_ratio") {
          dup += std::stod(cols[4]);
          ++dup_n;
        } else if (cols[0] == "trigram_repetition_rate") {
          tri += std::stod(cols[4]);
        }
      }
    }
    int wins = 0, total = 0;
    for (const auto& [seed, avg] : student_avgs[r]) {
      auto base = student_avgs[0].find(seed);
      if (base == student_avgs[0].end()) continue;
      ++total;
      if (avg >= base->second) ++wins;
    }
    out << "| " << runs[r].recipe << " | " << (n ? fmt(s2t / n) : "-") << " | "
        << (n ? fmt(t2s / n) : "-") << " | " << (n ? fmt(0.5 * (s2t + t2s) / n) : "-") << " | "
        << (dup_n ? fmt(dup / dup_n) : "-") << " | " << (dup_n ? fmt(tri / dup_n) : "-") << " | "
        << wins << "/" << total << " |\n";
  }

  // Reconstruction BLEU block, sides and agent orderings aligned across runs.
  out << "\nreconstruction BLEU (mean over seeds):\n";
  for (size_t r = 0; r < runs.size(); ++r) {
    std::map<std::string, std::pair<double, int>> recon;
    for (const auto& [seed, rows] : runs[r].diversity)
      for (const auto& cols : rows)
        if (cols[0] == "reconstruction_bleu") {
          auto& [sum, cnt] = recon[cols[1] + " " + cols[2] + "->" + cols[3]];
          sum += std::stod(cols[4]);
          cnt += 1;
        }
    out << "  " << runs[r].recipe << ":";
    for (const auto& [label, sc] : recon) out << "  " << label << "=" << fmt(sc.first / sc.second);
    out << '\n';
  }
  return out.str();
}

}  // namespace cbd
