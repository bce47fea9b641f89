#pragma once

#include <string>
#include <vector>

#include "deeplog/language.hpp"

namespace deeplog {

struct ParseResult {
  Model model;
  std::vector<Diagnostic> diagnostics;
  bool ok() const {
    for (const auto& d : diagnostics)
      if (d.severity == Diagnostic::Severity::Error) return false;
    return true;
  }
};

/// Parses a model file (statements: structure, domain, tensor, pred, truth,
/// label, formula; `%` comments). Returns a resolved model or diagnostics
/// with positions.
ParseResult parse_model(const std::string& text);

Model parse_model_or_throw(const std::string& text);

}  // namespace deeplog
