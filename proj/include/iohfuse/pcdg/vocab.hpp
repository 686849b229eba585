#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace iohfuse::pcdg {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kDefaultEta = 64;

/// Lowercased word and punctuation tokens; no domain-term merging.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary. Ids are dense: PAD = 0, UNK = 1, then domain terms
/// in the order given, then corpus words sorted lexicographically. Domain
/// terms match as whole word sequences and are never split.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  std::size_t id_of(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& domain_terms() const { return terms_; }

  /// Longest-match merge of domain terms over split_words(text).
  std::vector<std::string> segment(std::string_view text) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  friend Vocabulary build_vocabulary(std::span<const std::string>, std::span<const std::string>);
  std::size_t add(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> terms_;
  std::vector<std::vector<std::string>> term_words_;
};

/// Corpus words plus every domain term as one atomic token. Throws on an
/// empty corpus.
Vocabulary build_vocabulary(std::span<const std::string> corpus, std::span<const std::string> domain_terms);

struct TokenizedText {
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> mask;  // 1 for real tokens, then 0 for padding
};

/// Truncates to eta tokens or right-pads with PAD. Unknown tokens map to UNK.
TokenizedText tokenize_description(std::string_view text, const Vocabulary& vocab, std::size_t eta = kDefaultEta);

std::string detokenize(std::span<const std::size_t> ids, const Vocabulary& vocab);

/// Any tokenizer satisfying the (text, eta) -> ids + mask contract.
using TokenizerFn = std::function<TokenizedText(std::string_view text, std::size_t eta)>;

}  // namespace iohfuse::pcdg
