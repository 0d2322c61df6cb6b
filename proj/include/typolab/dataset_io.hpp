// Copyright 2026 The TypoLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TYPOLAB_DATASET_IO_HPP_
#define TYPOLAB_DATASET_IO_HPP_

// Triplet datasets as JSONL (one sample per line) plus a JSON sidecar.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "typolab/corpus.hpp"
#include "typolab/error.hpp"
#include "typolab/hash.hpp"

namespace typolab {

inline Variant variant_from_string(const std::string& s) {
  if (s == "clean") return Variant::kClean;
  if (s == "typo") return Variant::kTypo;
  if (s == "split") return Variant::kSplit;
  throw Error(ErrorCode::kParse, "unknown variant '" + s + "'");
}

inline nlohmann::json to_json(const PromptInstance& x) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : x.words) words.push_back({w.begin, w.end});
  return {{"variant", to_string(x.variant)},
          {"text", x.text},
          {"tokens", x.tokens.tokens},
          {"answer_span", {x.answer_begin, x.answer_end}},
          {"answer_chars", {x.answer_chars.begin, x.answer_chars.end}},
          {"words", words},
          {"marked", x.marked}};
}

inline PromptInstance instance_from_json(const nlohmann::json& j, const std::string& answer) {
  PromptInstance x;
  x.variant = variant_from_string(j.at("variant").get<std::string>());
  x.answer = answer;
  x.text = j.at("text").get<std::string>();
  x.tokens.tokens = j.at("tokens").get<std::vector<TokenId>>();
  x.tokens.source = x.text;
  x.answer_begin = j.at("answer_span").at(0).get<size_t>();
  x.answer_end = j.at("answer_span").at(1).get<size_t>();
  x.answer_chars = {j.at("answer_chars").at(0).get<size_t>(),
                    j.at("answer_chars").at(1).get<size_t>()};
  for (const auto& w : j.at("words")) {
    x.words.push_back({w.at(0).get<size_t>(), w.at(1).get<size_t>()});
  }
  x.marked = j.at("marked").get<std::vector<size_t>>();
  return x;
}

inline nlohmann::json to_json(const TripletSample& s) {
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& i : s.insertions) {
    ins.push_back({{"word", i.word},
                   {"offset", i.offset},
                   {"char", std::string(1, i.ch)},
                   {"text_pos", i.text_pos}});
  }
  return {{"index", s.index},
          {"seed", s.seed},
          {"word", s.word},
          {"definition", s.definition},
          {"selected_words", s.selected_words},
          {"insertions", ins},
          {"clean", to_json(s.clean)},
          {"typo", to_json(s.typo)},
          {"split", to_json(s.split)}};
}

inline TripletSample triplet_from_json(const nlohmann::json& j) {
  TripletSample s;
  s.index = j.at("index").get<size_t>();
  s.seed = j.at("seed").get<uint64_t>();
  s.word = j.at("word").get<std::string>();
  s.definition = j.at("definition").get<std::string>();
  s.selected_words = j.at("selected_words").get<std::vector<size_t>>();
  for (const auto& i : j.at("insertions")) {
    const auto ch = i.at("char").get<std::string>();
    if (ch.size() != 1) throw Error(ErrorCode::kParse, "insertion char must be one byte");
    s.insertions.push_back({i.at("word").get<size_t>(), i.at("offset").get<size_t>(),
                            ch[0], i.at("text_pos").get<size_t>()});
  }
  s.clean = instance_from_json(j.at("clean"), s.word);
  s.typo = instance_from_json(j.at("typo"), s.word);
  s.split = instance_from_json(j.at("split"), s.word);
  return s;
}

inline std::string triplets_jsonl(const TripletDataset& ds) {
  std::string out;
  for (const auto& s : ds.samples) out += to_json(s).dump() + "\n";
  return out;
}

inline nlohmann::json triplets_meta(const TripletDataset& ds) {
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& d : ds.dropped) {
    dropped.push_back({{"index", d.index}, {"word", d.word}, {"reason", d.reason}});
  }
  return {{"t", ds.t},
          {"seed", ds.seed},
          {"alphabet", ds.alphabet},
          {"template", ds.template_pattern},
          {"samples", ds.samples.size()},
          {"dropped", dropped}};
}

inline std::string meta_path_for(const std::string& jsonl_path) {
  return jsonl_path + ".meta.json";
}

// Writes `path` and its sidecar; `extra` is merged into the sidecar.
inline void save_triplets(const std::string& path, const TripletDataset& ds,
                          const nlohmann::json& extra = nlohmann::json::object()) {
  write_file(path, triplets_jsonl(ds));
  auto meta = triplets_meta(ds);
  meta["jsonl_hash"] = hash_string(triplets_jsonl(ds));
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  write_file(meta_path_for(path), meta.dump(2) + "\n");
}

inline TripletDataset parse_triplets(std::string_view jsonl, const nlohmann::json& meta) {
  TripletDataset ds;
  size_t pos = 0, line_no = 0;
  while (pos < jsonl.size()) {
    size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      ds.samples.push_back(triplet_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "triplets line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  try {
    ds.t = meta.value("t", size_t{0});
    ds.seed = meta.value("seed", uint64_t{0});
    ds.alphabet = meta.value("alphabet", std::string(kDefaultAlphabet));
    ds.template_pattern = meta.value("template", std::string(PromptTemplate::kDefault));
    for (const auto& d : meta.value("dropped", nlohmann::json::array())) {
      ds.dropped.push_back({d.at("index").get<size_t>(), d.at("word").get<std::string>(),
                            d.at("reason").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("triplet metadata: ") + e.what());
  }
  return ds;
}

// Loads a JSONL file and, when present, its sidecar.
inline TripletDataset load_triplets(const std::string& path) {
  const std::string jsonl = read_file(path);
  nlohmann::json meta = nlohmann::json::object();
  try {
    meta = nlohmann::json::parse(read_file(meta_path_for(path)));
  } catch (const Error&) {
    // No sidecar: defaults.
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, meta_path_for(path) + ": " + e.what());
  }
  return parse_triplets(jsonl, meta);
}

}  // namespace typolab

#endif  // TYPOLAB_DATASET_IO_HPP_
