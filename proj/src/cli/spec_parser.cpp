#include <cctype>
#include <charconv>
#include <algorithm>
#include <map>

#include "qparity/cli.hpp"

namespace qparity::cli {

namespace {

struct Token {
  std::string text;
  std::size_t position;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back({text.substr(start, i - start), start});
  }
  return tokens;
}

double parse_real(const std::string& s, std::size_t position) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = first + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || s.empty()) throw ParseError("expected a number, got '" + s + "'", position);
  return v;
}

int parse_int(const std::string& s, std::size_t position) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ParseError("expected an integer, got '" + s + "'", position);
  return v;
}

// "0.5", "-1", "0.3i", "0.5+0.2i", "1e-3-2i"
Complex parse_complex(const std::string& s, std::size_t position) {
  if (s.empty()) throw ParseError("empty alpha", position);
  if (s.back() != 'i') return {parse_real(s, position), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  // Split at the last sign that is not the leading one or part of an exponent.
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      const std::string im = body.substr(i);
      return {parse_real(body.substr(0, i), position),
              im.size() == 1 ? (im[0] == '-' ? -1.0 : 1.0) : parse_real(im, position + i)};
    }
  }
  if (body.empty() || body == "+") return {0.0, 1.0};
  if (body == "-") return {0.0, -1.0};
  return {0.0, parse_real(body, position)};
}

}  // namespace

StateSpec parse_state_spec(const std::string& text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw ParseError("empty state spec", 0);
  const std::string& family = tokens[0].text;
  static const std::map<std::string, std::vector<std::string>> required = {
      {"fock", {"l"}},          {"coherent", {"alpha"}}, {"thermal", {"nbar"}}, {"binomial", {"eta", "M"}},
      {"ecs", {"alpha"}},       {"ebs", {"eta", "M"}},   {"ets", {"nbar"}},
  };
  const auto fam = required.find(family);
  if (fam == required.end())
    throw ParseError("unknown state family '" + family + "' (fock, coherent, thermal, binomial, ecs, ebs, ets)",
                     tokens[0].position);

  std::map<std::string, Token> values;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto& tok = tokens[t];
    const auto eq = tok.text.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value, got '" + tok.text + "'", tok.position);
    const std::string key = tok.text.substr(0, eq);
    const auto& keys = fam->second;
    if (key != "k" && std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ParseError("key '" + key + "' does not apply to '" + family + "'", tok.position);
    if (values.count(key)) throw ParseError("duplicate key '" + key + "'", tok.position);
    values[key] = Token{tok.text.substr(eq + 1), tok.position + eq + 1};
  }
  for (const auto& key : fam->second)
    if (!values.count(key)) throw ParseError("missing key '" + key + "' for '" + family + "'", text.size());

  auto real = [&](const char* key) { return parse_real(values[key].text, values[key].position); };
  auto integer = [&](const char* key) { return parse_int(values[key].text, values[key].position); };

  BaseSpec base;
  if (family == "fock") {
    base = FockSpec{integer("l")};
  } else if (family == "coherent" || family == "ecs") {
    base = CoherentSpec{parse_complex(values["alpha"].text, values["alpha"].position)};
  } else if (family == "thermal" || family == "ets") {
    base = ThermalSpec{real("nbar")};
  } else {
    base = BinomialSpec{real("eta"), integer("M")};
  }

  const bool added_family = family == "ecs" || family == "ebs" || family == "ets";
  std::optional<int> k;
  if (values.count("k")) {
    k = integer("k");
    if (*k < 1) throw ParseError("k must be >= 1", values["k"].position);
  } else if (added_family) {
    k = 1;
  }

  StateSpec spec = k ? StateSpec{PhotonAddedSpec{*k, base}}
                     : std::visit([](const auto& s) { return StateSpec{s}; }, base);
  try {
    validate(spec);
  } catch (const DomainError& e) {
    // Point at the value the message names, else at the family token.
    const std::string message = e.what();
    std::size_t position = tokens[0].position;
    for (const auto& [key, tok] : values)
      if (message.find(" " + key + " ") != std::string::npos || message.find(key + " must") == 0) position = tok.position;
    throw ParseError(message, position);
  }
  return spec;
}

}  // namespace qparity::cli
