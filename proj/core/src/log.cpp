#include "lsf/log.hpp"

#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace lsf {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler_slot() {
  static WarningHandler h;
  return h;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (auto& h = handler_slot()) {
    h(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(handler_slot(), std::move(handler));
}

WarningCapture::WarningCapture()
    : previous_(set_warning_handler([this](std::string_view m) { messages_.emplace_back(m); })) {}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

}  // namespace lsf
