#pragma once

#include <filesystem>
#include <string>

#include "mlpert/perturb.hpp"

namespace mlpert {

/// Shortest round-trip spelling of a level, used in file names.
std::string level_tag(double level);
std::string noise_file_name(double level);
std::string copy_file_name(double level);

/// Writes session.json, original.csv and one noise_<level>.csv per level.
/// Existing noise files are rewritten only when missing.
void save_session(const std::filesystem::path& dir, const PerturbSession& session);
PerturbSession load_session(const std::filesystem::path& dir);
bool has_session(const std::filesystem::path& dir);

/// Exclusive writer lock on a session directory (a `.lock` file created
/// with O_EXCL semantics). Released on destruction.
class SessionLock {
 public:
  explicit SessionLock(const std::filesystem::path& dir);
  ~SessionLock();
  SessionLock(const SessionLock&) = delete;
  SessionLock& operator=(const SessionLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace mlpert
