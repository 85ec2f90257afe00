#pragma once

#include <cstdint>
#include <string>

namespace gridflow {

// Identity of one stored dataset version inside a run.
struct ResultKey {
  std::string hash;  // content id of the dataset
  std::string run_id;
  std::string activity_id;
  std::uint64_t sequence = 0;

  std::string str() const {
    return run_id + "/" + activity_id + "/" + std::to_string(sequence) + "/" + hash;
  }
  friend bool operator==(const ResultKey&, const ResultKey&) = default;
  friend auto operator<=>(const ResultKey&, const ResultKey&) = default;
};

}  // namespace gridflow
