#include "mofill/run_config.hpp"

#include <array>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "mofill/error.hpp"
#include "mofill/io.hpp"

namespace mofill {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename I>
I parse_integer(std::string_view s) {
  I v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw UsageError("'" + std::string(s) + "' is not an integer");
  return v;
}

}  // namespace

bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw UsageError("'" + std::string(text) + "' is not a boolean");
}

RunConfig parse_run_config(std::string_view text, const std::string& origin) {
  RunConfig rc;
  TrainConfig& t = rc.train;
  using Setter = std::function<void(std::string_view)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"epochs", [&](auto v) { t.epochs = parse_integer<int>(v); }},
      {"batch_size", [&](auto v) { t.batch_size = parse_integer<int>(v); }},
      {"learning_rate", [&](auto v) { t.optim.learning_rate = parse_real(v); }},
      {"beta1", [&](auto v) { t.optim.beta1 = parse_real(v); }},
      {"beta2", [&](auto v) { t.optim.beta2 = parse_real(v); }},
      {"epsilon", [&](auto v) { t.optim.epsilon = parse_real(v); }},
      {"seed", [&](auto v) { t.seed = parse_integer<std::uint64_t>(v); }},
      {"curriculum", [&](auto v) { t.curriculum = parse_bool(v); }},
      {"fixed_gap", [&](auto v) { t.fixed_gap = parse_integer<int>(v); }},
      {"force_mu", [&](auto v) { t.force_mu = parse_integer<int>(v); }},
      {"gap_ratio", [&](auto v) { t.gap_ratio = parse_real(v); }},
      {"val_fraction", [&](auto v) { t.val_fraction = parse_real(v); }},
      {"checkpoint_every", [&](auto v) { t.checkpoint_every = parse_integer<int>(v); }},
      {"checkpoint_dir", [&](auto v) { t.checkpoint_dir = std::string(v); }},
      {"threads", [&](auto v) { t.threads = parse_integer<int>(v); }},
      {"leaky_slope", [&](auto v) { t.model.leaky_slope = parse_real(v); }},
      {"architecture",
       [&](auto v) {
         if (v == "full") t.model.architecture = Architecture::full;
         else if (v == "vanilla") t.model.architecture = Architecture::vanilla;
         else throw UsageError("architecture must be full or vanilla");
       }},
      {"channels",
       [&](auto v) {
         std::array<int, kEncodingUnits> ch{};
         std::size_t i = 0;
         std::string_view rest = v;
         while (true) {
           const auto comma = rest.find(',');
           if (i == ch.size()) throw UsageError("channels needs exactly 5 values");
           ch[i++] = parse_integer<int>(trim(rest.substr(0, comma)));
           if (comma == std::string_view::npos) break;
           rest.remove_prefix(comma + 1);
         }
         if (i != ch.size()) throw UsageError("channels needs exactly 5 values");
         t.model.channels = ch;
       }},
      {"data", [&](auto v) { rc.data = std::string(v); }},
      {"weights", [&](auto v) { rc.weights = std::string(v); }},
      {"stats", [&](auto v) { rc.stats = std::string(v); }},
      {"log", [&](auto v) { rc.log = std::string(v); }},
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError(where + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw UsageError(where + ": unknown key '" + key + "'");
    if (!rc.keys.insert(key).second) throw UsageError(where + ": key '" + key + "' repeated");
    try {
      it->second(value);
    } catch (const UsageError& e) {
      throw UsageError(where + ": " + key + ": " + e.what());
    } catch (const DataError& e) {
      throw UsageError(where + ": " + key + ": " + e.what());
    }
  }
  t.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const DataError&) {
    throw UsageError("cannot read config file " + path.string());
  }
  return parse_run_config(text, path.string());
}

}  // namespace mofill
