#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxmlc::log {

using Sink = std::function<void(std::string_view)>;

// Replaces the warning sink; an empty sink restores the stderr default.
// Returns the previous sink.
Sink set_warning_sink(Sink sink);

void warn(std::string_view message);

// Restores the previous sink on destruction; collects warnings meanwhile.
class ScopedCapture {
 public:
  ScopedCapture();
  ~ScopedCapture();
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  Sink previous_;
  std::vector<std::string> messages_;
};

}  // namespace ctxmlc::log
