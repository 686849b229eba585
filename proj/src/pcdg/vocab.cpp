#include "iohfuse/pcdg/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"

namespace iohfuse::pcdg {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '\'' || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<std::string> Vocabulary::segment(std::string_view text) const {
  const auto words = split_words(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size();) {
    std::size_t best = 0;
    std::size_t best_len = 0;
    for (std::size_t k = 0; k < term_words_.size(); ++k) {
      const auto& tw = term_words_[k];
      if (tw.size() <= best_len || i + tw.size() > words.size()) continue;
      if (std::equal(tw.begin(), tw.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        best = k;
        best_len = tw.size();
      }
    }
    if (best_len > 0) {
      out.push_back(terms_[best]);
      i += best_len;
    } else {
      out.push_back(words[i]);
      ++i;
    }
  }
  return out;
}

nlohmann::json Vocabulary::to_json() const { return {{"tokens", tokens_}, {"domain_terms", terms_}}; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw SchemaError("vocabulary must start with <pad>, <unk>");
  }
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) throw SchemaError("vocabulary has duplicate token '" + tokens[i] + "'");
  }
  for (const auto& t : j.at("domain_terms").get<std::vector<std::string>>()) {
    v.terms_.push_back(t);
    v.term_words_.push_back(split_words(t));
  }
  return v;
}

Vocabulary build_vocabulary(std::span<const std::string> corpus, std::span<const std::string> domain_terms) {
  if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  Vocabulary v;
  for (const auto& term : domain_terms) {
    const auto words = split_words(term);
    if (words.empty()) continue;
    std::string canon = words[0];
    for (std::size_t i = 1; i < words.size(); ++i) canon += " " + words[i];
    if (std::find(v.terms_.begin(), v.terms_.end(), canon) != v.terms_.end()) continue;
    v.terms_.push_back(canon);
    v.term_words_.push_back(words);
    v.add(canon);
  }
  std::set<std::string> words;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) words.insert(std::move(w));
  }
  for (const auto& w : words) v.add(w);
  return v;
}

TokenizedText tokenize_description(std::string_view text, const Vocabulary& vocab, std::size_t eta) {
  if (eta == 0) throw std::invalid_argument("tokenize_description: eta must be >= 1");
  TokenizedText out;
  out.ids.assign(eta, kPadId);
  out.mask.assign(eta, 0);
  const auto toks = vocab.segment(text);
  const std::size_t n = std::min(eta, toks.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.ids[i] = vocab.id_of(toks[i]);
    out.mask[i] = 1;
  }
  return out;
}

std::string detokenize(std::span<const std::size_t> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t id : ids) {
    if (id == kPadId) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace iohfuse::pcdg
