#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace sicm::cli {

// exit codes
constexpr int kOk = 0, kOther = 1, kValidation = 2, kConvergence = 3, kInfeasible = 4;

// args[0] is the program name; the result document goes to out, diagnostics to err
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const std::vector<std::string>& commands();

// throws ValidationError unless doc is a result document with its command's required keys
void check_result(const nlohmann::json& doc);

}  // namespace sicm::cli
