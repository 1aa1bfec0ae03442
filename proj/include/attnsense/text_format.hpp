#ifndef ATTNSENSE_TEXT_FORMAT_HPP
#define ATTNSENSE_TEXT_FORMAT_HPP

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace attnsense {

using Json = nlohmann::ordered_json;

/// Shortest decimal string that parses back to exactly `value`.
std::string format_real(double value);

/// Parses a full decimal token; throws ParseError(line) otherwise.
double parse_real(std::string_view token, std::size_t line);
long long parse_integer(std::string_view token, std::size_t line);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Splits on '\n'. A single trailing newline does not produce an empty line.
std::vector<std::string> split_lines(std::string_view text);

/// Parses one JSON object from a line, mapping failures to ParseError.
Json parse_json_object(std::string_view text, std::size_t line);

/// Rejects members outside `allowed` and reports the first missing
/// member of `required`, both as SchemaError naming the field.
void check_members(const Json& object, std::initializer_list<std::string_view> required,
                   std::initializer_list<std::string_view> optional, std::size_t line,
                   std::string_view context);

/// Typed member access; type mismatches become ParseError naming the field.
template <typename T>
T member(const Json& object, std::string_view name, std::size_t line);

}  // namespace attnsense

#endif  // ATTNSENSE_TEXT_FORMAT_HPP
