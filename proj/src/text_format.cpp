#include "attnsense/text_format.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "attnsense/errors.hpp"

namespace attnsense {

std::string format_real(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_real(std::string_view token, std::size_t line) {
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || result.ec != std::errc() || result.ptr != token.data() + token.size())
        throw ParseError(line, "invalid real '" + std::string(token) + "'");
    return value;
}

long long parse_integer(std::string_view token, std::size_t line) {
    long long value = 0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || result.ec != std::errc() || result.ptr != token.data() + token.size())
        throw ParseError(line, "invalid integer '" + std::string(token) + "'");
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
    return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

Json parse_json_object(std::string_view text, std::size_t line) {
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(line, std::string("malformed object: ") + e.what());
    }
    if (!value.is_object()) throw ParseError(line, "expected an object");
    return value;
}

void check_members(const Json& object, std::initializer_list<std::string_view> required,
                   std::initializer_list<std::string_view> optional, std::size_t line,
                   std::string_view context) {
    for (const auto& item : object.items()) {
        bool known = false;
        for (auto name : required) known = known || item.key() == name;
        for (auto name : optional) known = known || item.key() == name;
        if (!known)
            throw SchemaError(line, std::string(context) + ": unknown field '" + item.key() + "'");
    }
    for (auto name : required) {
        if (!object.contains(std::string(name)))
            throw SchemaError(line, std::string(context) + ": missing required field '" + std::string(name) + "'");
    }
}

namespace {

[[noreturn]] void type_error(std::string_view name, std::string_view expected, std::size_t line) {
    throw ParseError(line, "field '" + std::string(name) + "' must be " + std::string(expected));
}

}  // namespace

template <>
double member<double>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_number()) type_error(name, "a number", line);
    return v.get<double>();
}

template <>
long long member<long long>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_number_integer()) type_error(name, "an integer", line);
    return v.get<long long>();
}

template <>
int member<int>(const Json& object, std::string_view name, std::size_t line) {
    const long long v = member<long long>(object, name, line);
    if (v < INT32_MIN || v > INT32_MAX) type_error(name, "a 32-bit integer", line);
    return static_cast<int>(v);
}

template <>
std::uint64_t member<std::uint64_t>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_number_unsigned()) type_error(name, "a nonnegative integer", line);
    return v.get<std::uint64_t>();
}

template <>
std::string member<std::string>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_string()) type_error(name, "a string", line);
    return v.get<std::string>();
}

template <>
std::vector<double> member<std::vector<double>>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_array()) type_error(name, "an array of numbers", line);
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) type_error(name, "an array of numbers", line);
        out.push_back(x.get<double>());
    }
    return out;
}

template <>
std::vector<int> member<std::vector<int>>(const Json& object, std::string_view name, std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_array()) type_error(name, "an array of integers", line);
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number_integer()) type_error(name, "an array of integers", line);
        out.push_back(x.get<int>());
    }
    return out;
}

template <>
std::vector<std::string> member<std::vector<std::string>>(const Json& object, std::string_view name,
                                                          std::size_t line) {
    const Json& v = object.at(std::string(name));
    if (!v.is_array()) type_error(name, "an array of strings", line);
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) type_error(name, "an array of strings", line);
        out.push_back(x.get<std::string>());
    }
    return out;
}

}  // namespace attnsense
