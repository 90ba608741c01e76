#include "cmag/trainers.hpp"

namespace cmag::train {

bool EarlyStopper::update(std::size_t epoch, double value) {
  const bool better = !seen_ || (maximize_ ? value > best_ : value < best_);
  if (better) {
    seen_ = true;
    best_ = value;
    best_epoch_ = epoch;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return better;
}

}  // namespace cmag::train
