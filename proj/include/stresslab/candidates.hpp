#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stresslab {

// Supplies substitution candidates for one token position; used by the
// greedy attack and by the bert_diverge noise kind.
class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> candidates(const std::vector<std::string>& tokens,
                                              std::size_t position) = 0;
};

}  // namespace stresslab
