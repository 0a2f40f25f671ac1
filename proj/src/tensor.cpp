// SPDX-License-Identifier: Apache-2.0
#include "hit/tensor.hpp"

namespace hit {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace mac {
namespace {

thread_local Recorder* active_recorder = nullptr;
thread_local const char* active_module = "unscoped";

}  // namespace

std::uint64_t Tally::module(std::string_view name) const {
  for (const auto& [n, v] : by_module) {
    if (n == name) return v;
  }
  return 0;
}

void record(std::uint64_t macs) {
  Recorder* r = active_recorder;
  if (r == nullptr) return;
  r->tally_.total += macs;
  for (auto& [name, count] : r->tally_.by_module) {
    if (name == active_module) {
      count += macs;
      return;
    }
  }
  r->tally_.by_module.emplace_back(active_module, macs);
}

Recorder::Recorder() : previous_(active_recorder) { active_recorder = this; }

Recorder::~Recorder() { active_recorder = previous_; }

ModuleScope::ModuleScope(const char* name) : previous_(active_module) {
  active_module = name;
}

ModuleScope::~ModuleScope() { active_module = previous_; }

}  // namespace mac
}  // namespace hit
