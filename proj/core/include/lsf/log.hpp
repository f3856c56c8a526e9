#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lsf {

using WarningHandler = std::function<void(std::string_view)>;

/// Emits a warning through the installed handler (stderr by default). Thread-safe.
void warn(std::string_view message);

/// Replaces the warning handler and returns the previous one. An empty handler restores stderr.
WarningHandler set_warning_handler(WarningHandler handler);

/// Collects warnings for the lifetime of the object; restores the previous handler on exit.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace lsf
