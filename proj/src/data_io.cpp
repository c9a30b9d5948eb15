#include "dictdis/data_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dictdis/common.hpp"

namespace dictdis {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::Io, "cannot open for writing: " + path);
  out << content;
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path);
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::string text = read_file(path);
  std::vector<std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(tokenize(line));
  return lines;
}

std::string examples_to_jsonl(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    json rec;
    rec["src_ids"] = ex.source;
    rec["tgt_ids"] = ex.target;
    json cons = json::array();
    for (const auto& m : ex.constraints) {
      json c;
      c["span"] = {m.start, m.end};
      c["candidates"] = m.candidates;
      cons.push_back(std::move(c));
    }
    rec["constraints"] = std::move(cons);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<Example> examples_from_jsonl(const std::string& text) {
  std::vector<Example> examples;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCategory::Format,
                  "prepared data line " + std::to_string(lineno) + ": " + e.what());
    }
    Example ex;
    ex.source = rec.at("src_ids").get<std::vector<int>>();
    ex.target = rec.at("tgt_ids").get<std::vector<int>>();
    for (const auto& c : rec.at("constraints")) {
      ConstraintMatch m;
      m.start = c.at("span").at(0).get<std::size_t>();
      m.end = c.at("span").at(1).get<std::size_t>();
      m.candidates = c.at("candidates").get<std::vector<std::vector<int>>>();
      ex.constraints.push_back(std::move(m));
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace dictdis
