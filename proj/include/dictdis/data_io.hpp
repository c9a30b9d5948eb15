#pragma once

#include <string>
#include <vector>

#include "dictdis/batch.hpp"
#include "dictdis/vocab.hpp"

namespace dictdis {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// One sentence per line, whitespace-tokenized.
std::vector<std::vector<std::string>> read_token_lines(const std::string& path);

// Prepared-data records: one JSON object per line with fields
//   src_ids, tgt_ids, constraints: [{span: [start, end), candidates: [[ids]...]}]
std::string examples_to_jsonl(const std::vector<Example>& examples);
std::vector<Example> examples_from_jsonl(const std::string& text);

}  // namespace dictdis
