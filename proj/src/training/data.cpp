#include <sstream>

#include "lmforge/digest.hpp"
#include "lmforge/errors.hpp"
#include "lmforge/training.hpp"

namespace lmforge::training {

std::string vocabulary_digest(const corpus::Vocabulary& vocab) {
  // Same bytes as vocab.txt.
  std::ostringstream out;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out << vocab.tokens()[i] << '\t' << vocab.frequency(static_cast<TokenId>(i)) << '\n';
  return sha256_hex(out.str());
}

CorpusData load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("corpus directory " + dir.string() + " does not exist");
  CorpusData d;
  d.vocab = corpus::Vocabulary::read(dir / "vocab.txt");
  d.vocab_digest = vocabulary_digest(d.vocab);
  d.train = corpus::load_split_ids(dir / "train.txt", d.vocab);
  d.dev = corpus::load_split_ids(dir / "valid.txt", d.vocab);
  d.test = corpus::load_split_ids(dir / "test.txt", d.vocab);
  return d;
}

}  // namespace lmforge::training
