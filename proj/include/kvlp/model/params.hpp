#pragma once

#include "kvlp/autodiff/tensor.hpp"
#include "kvlp/util/rng.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace kvlp::model {

using ad::Matrix;
using ad::Tensor;
using ad::Index;

// Named trainable leaves in registration order. Modules keep copies of the
// Tensor handles, which share storage with the store.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool decay = true;  // false for biases and norm parameters
  };

  Tensor add(const std::string& name, Matrix init, bool decay = true);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t num_scalars() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

Matrix xavier_uniform(Index rows, Index cols, Rng& rng);
Matrix normal_matrix(Index rows, Index cols, double stddev, Rng& rng);

}  // namespace kvlp::model
