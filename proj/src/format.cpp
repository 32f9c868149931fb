#include "aggflow/format.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace aggflow {

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double x = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument(std::string(what) + ": cannot parse '" + std::string(s) + "' as a number");
  return x;
}

long parse_integer(std::string_view s, std::string_view what) {
  s = trim(s);
  long x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument(std::string(what) + ": cannot parse '" + std::string(s) + "' as an integer");
  return x;
}

}  // namespace aggflow
