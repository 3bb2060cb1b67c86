#pragma once

#include <functional>
#include <string>
#include <vector>

namespace divsel {

using WarningHandler = std::function<void(const std::string&)>;

/// Emit a non-fatal diagnostic through the installed handler (stderr by default).
/// Safe to call from several threads.
void warn(const std::string& message);

/// Install a new handler and return the previous one. An empty handler silences warnings.
WarningHandler set_warning_handler(WarningHandler handler);

/// Collects warnings for the lifetime of the object; used by tests.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

} // namespace divsel
