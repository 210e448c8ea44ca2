#include "hibehrt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace hibehrt {

namespace {
constexpr const char* kSpecialModality = "SPECIAL";
const char* kReservedNames[] = {"[PAD]", "[UNK]", "[MASK]", "[CLS]"};
}  // namespace

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) {
    ids_.emplace(name, static_cast<std::int64_t>(tokens_.size()));
    tokens_.push_back(name);
    modalities_.push_back(Modality::DIAG);
  }
}

std::int64_t Vocabulary::lookup(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
  if (id < 0 || id >= size()) throw IdOutOfRange("vocabulary id out of range: " + std::to_string(id));
  return tokens_[id];
}

Modality Vocabulary::modality_of(std::int64_t id) const {
  if (id < 0 || id >= size()) throw IdOutOfRange("vocabulary id out of range: " + std::to_string(id));
  return modalities_[id];
}

void Vocabulary::add(const std::string& token, Modality m) {
  if (ids_.count(token)) return;
  ids_.emplace(token, static_cast<std::int64_t>(tokens_.size()));
  tokens_.push_back(token);
  modalities_.push_back(m);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFound(path);
  for (std::int64_t id = 0; id < size(); ++id) {
    const char* mod = id < kFirstCorpusId ? kSpecialModality : modality_name(modalities_[id]);
    out << id << '\t' << tokens_[id] << '\t' << mod << '\n';
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound(path);
  Vocabulary v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id_s, tok, mod;
    if (!std::getline(ss, id_s, '\t') || !std::getline(ss, tok, '\t') || !std::getline(ss, mod))
      throw ParseError(line_no, "expected id<TAB>token<TAB>modality");
    std::int64_t id;
    try {
      id = std::stoll(id_s);
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad id: " + id_s);
    }
    if (id < kFirstCorpusId) {
      if (id >= static_cast<std::int64_t>(std::size(kReservedNames)) || tok != kReservedNames[id])
        throw ParseError(line_no, "reserved id/token mismatch");
      continue;
    }
    if (id != v.size()) throw ParseError(line_no, "ids must be ascending and contiguous");
    v.add(tok, modality_from_name(mod));
  }
  return v;
}

Vocabulary build_vocabulary(const std::vector<PatientRecord>& corpus) {
  if (corpus.empty()) throw EmptyCorpus();
  std::map<std::string, Modality> seen;  // sorted by token text
  for (const PatientRecord& p : corpus) {
    for (const Visit& visit : p.visits) {
      for (const RawEvent& e : visit.events) {
        if (modality_is_valued(e.modality) && e.value) {
          const BinningSpec spec = default_binning(e.modality);
          if (*e.value < spec.min || *e.value > spec.max) continue;  // out-of-range values are dropped
        }
        seen.emplace(event_token(e), e.modality);
      }
    }
  }
  Vocabulary v;
  for (const auto& [tok, mod] : seen) v.add(tok, mod);
  return v;
}

}  // namespace hibehrt
