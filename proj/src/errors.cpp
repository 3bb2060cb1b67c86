#include "divsel/errors.hpp"
#include "divsel/log.hpp"

#include <iostream>
#include <mutex>

namespace divsel {

namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot() {
    static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return h;
}

} // namespace

void warn(const std::string& message) {
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) handler_slot()(message);
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

ScopedWarningCapture::ScopedWarningCapture()
    : previous_(set_warning_handler([this](const std::string& msg) { messages_.push_back(msg); })) {}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }

} // namespace divsel
