#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbd/agent.hpp"

namespace cbd {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (TokenId id = Vocab::kFirstWord; id < vocab.size(); ++id)
    out << vocab.surface(id) << '\t' << vocab.frequency(id) << '\n';
}

std::shared_ptr<const Vocab> read_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::pair<std::string, int64_t>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed vocab line: " + line);
    entries.emplace_back(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  return std::make_shared<Vocab>(Vocab::from_counts(std::move(entries)));
}

void write_table(const TranslationTable& table, const Vocab& src_vocab, const Vocab& tgt_vocab,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (TokenId src : table.source_words()) {
    const TableRow* row = table.row(src);
    for (const auto& [tgt, prob] : row->cands)
      out << src_vocab.surface(src) << '\t' << tgt_vocab.surface(tgt) << '\t' << fmt_double(prob)
          << '\n';
  }
}

TranslationTable read_table(Direction dir, const Vocab& src_vocab, const Vocab& tgt_vocab,
                            const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  TranslationTable table(dir);
  std::string line;
  TokenId cur_src = -1;
  TableRow row;
  auto flush = [&]() {
    if (cur_src >= 0) table.set_row_raw(cur_src, std::move(row));
    row = TableRow{};
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw IoError("malformed table line: " + line);
    TokenId src = src_vocab.id(line.substr(0, t1));
    TokenId tgt = tgt_vocab.id(line.substr(t1 + 1, t2 - t1 - 1));
    double prob = std::stod(line.substr(t2 + 1));
    if (src != cur_src) {
      flush();
      cur_src = src;
    }
    row.cands.emplace_back(tgt, prob);
  }
  flush();
  return table;
}

}  // namespace

void save_agent(const Agent& agent, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_vocab(*agent.vocab_s, dir + "/vocab.s.tsv");
  write_vocab(*agent.vocab_t, dir + "/vocab.t.tsv");
  write_table(agent.table_s2t, *agent.vocab_s, *agent.vocab_t, dir + "/table.s2t.tsv");
  write_table(agent.table_t2s, *agent.vocab_t, *agent.vocab_s, dir + "/table.t2s.tsv");
  {
    std::ofstream lm_s(dir + "/lm.s.txt", std::ios::binary);
    std::ofstream lm_t(dir + "/lm.t.txt", std::ios::binary);
    if (!lm_s || !lm_t) throw IoError("cannot write LM files under " + dir);
    agent.lm_s.save(lm_s);
    agent.lm_t.save(lm_t);
  }
  std::ofstream meta(dir + "/meta.txt", std::ios::binary);
  if (!meta) throw IoError("cannot write meta under " + dir);
  meta << "id = " << agent.id << '\n'
       << "seed = " << agent.seed << '\n'
       << "lm_weight = " << fmt_double(agent.lm_weight) << '\n'
       << "reorder_window = " << agent.reorder_window << '\n'
       << "em_iterations = " << agent.em_iterations << '\n'
       << "ibt_rounds_done = " << agent.ibt_rounds_done << '\n';
  if (!agent.init_warning.empty()) meta << "init_warning = " << agent.init_warning << '\n';
}

Agent load_agent(const std::string& dir) {
  Agent agent;
  agent.vocab_s = read_vocab(dir + "/vocab.s.tsv");
  agent.vocab_t = read_vocab(dir + "/vocab.t.tsv");
  agent.table_s2t = read_table(Direction::S2T, *agent.vocab_s, *agent.vocab_t,
                               dir + "/table.s2t.tsv");
  agent.table_t2s = read_table(Direction::T2S, *agent.vocab_t, *agent.vocab_s,
                               dir + "/table.t2s.tsv");
  {
    std::ifstream lm_s(dir + "/lm.s.txt", std::ios::binary);
    std::ifstream lm_t(dir + "/lm.t.txt", std::ios::binary);
    if (!lm_s || !lm_t) throw IoError("cannot open LM files under " + dir);
    agent.lm_s = LanguageModel::load(lm_s, agent.vocab_s);
    agent.lm_t = LanguageModel::load(lm_t, agent.vocab_t);
  }
  std::ifstream meta(dir + "/meta.txt");
  if (!meta) throw IoError("cannot open " + dir + "/meta.txt");
  std::string line;
  while (std::getline(meta, line)) {
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
    if (key == "id") agent.id = val;
    else if (key == "seed") agent.seed = std::stoull(val);
    else if (key == "lm_weight") agent.lm_weight = std::stod(val);
    else if (key == "reorder_window") agent.reorder_window = std::stoi(val);
    else if (key == "em_iterations") agent.em_iterations = std::stoi(val);
    else if (key == "ibt_rounds_done") agent.ibt_rounds_done = std::stoi(val);
    else if (key == "init_warning") agent.init_warning = val;
    else throw IoError("unknown agent meta key: " + key);
  }
  return agent;
}

}  // namespace cbd
