#ifndef POLAR_ERROR_H_
#define POLAR_ERROR_H_

#include <stdexcept>
#include <string>

namespace polar {

// Raised for contract violations and unrecoverable input problems. Recoverable
// per-row problems (malformed corpus lines, bad lexicon rows) are collected in
// reject reports instead.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

}  // namespace polar

#endif  // POLAR_ERROR_H_
