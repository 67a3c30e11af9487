#ifndef KME_SERIALIZATION_HPP
#define KME_SERIALIZATION_HPP
#pragma once

// Text form of an embedding:
//
//   gaussian(sigma=0.5,dim=1)      <- kernel descriptor
//   0.25 0.5                       <- one line per point: coordinates..., weight
//   1 0.5
//
// Numbers use the shortest decimal that round-trips, so write -> read is
// bit-exact. Pullback kernels carry an opaque function and are not
// serializable.

#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "format.hpp"
#include "kernels.hpp"

namespace kme {

namespace detail {

class DescriptorParser {
public:
    explicit DescriptorParser(std::string_view text) : text_(text) {}

    Kernel parse() {
        Kernel k = parse_kernel();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return k;
    }

private:
    Kernel parse_kernel() {
        const std::string name = parse_identifier();
        expect('(');
        if (name == "product") {
            Kernel left = parse_kernel();
            expect(',');
            Kernel right = parse_kernel();
            expect(')');
            return Kernel::product(std::move(left), std::move(right));
        }
        std::map<std::string, std::string> args;
        skip_ws();
        if (peek() != ')') {
            while (true) {
                const std::string key = parse_identifier();
                expect('=');
                args[key] = parse_value();
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                break;
            }
        }
        expect(')');
        auto take = [&](const std::string& key) -> std::string {
            auto it = args.find(key);
            if (it == args.end()) fail("kernel '" + name + "' is missing '" + key + "'");
            std::string v = it->second;
            args.erase(it);
            return v;
        };
        auto take_or = [&](const std::string& key, std::string fallback) {
            return args.count(key) ? take(key) : fallback;
        };
        const auto dim = static_cast<std::size_t>(parse_u64(take_or("dim", "1")));
        std::optional<Kernel> out;
        if (name == "gaussian") {
            out = Kernel::gaussian(parse_double(take("sigma")), dim);
        } else if (name == "laplacian") {
            out = Kernel::laplacian(parse_double(take("sigma")), dim);
        } else if (name == "polynomial") {
            out = Kernel::polynomial(static_cast<unsigned>(parse_u64(take("degree"))), dim);
        } else if (name == "matern") {
            const double s = parse_double(take("s"));
            const bool normalized = parse_u64(take_or("normalized", "0")) != 0;
            out = Kernel::matern(s, dim, normalized);
        } else {
            fail("unknown kernel '" + name + "'");
        }
        if (!args.empty()) fail("unexpected parameter '" + args.begin()->first + "' for kernel '" + name + "'");
        return *out;
    }

    std::string parse_identifier() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (start == pos_) fail("expected a name");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string parse_value() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ')' && text_[pos_] != ' ') ++pos_;
        if (start == pos_) fail("expected a value");
        return std::string(text_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError("kernel descriptor '" + std::string(text_) + "' at column " + std::to_string(pos_) +
                              ": " + msg);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Inverse of Kernel::describe() for every kernel except pullbacks.
inline Kernel parse_kernel(std::string_view descriptor) { return detail::DescriptorParser(trim(descriptor)).parse(); }

inline void write_embedding(std::ostream& out, const Embedding& e) {
    if (std::holds_alternative<PullbackKernel>(e.kernel().variant())) {
        throw ValidationError("write_embedding: pullback kernels are not serializable");
    }
    out << e.kernel().describe() << '\n';
    const auto& s = e.expansion();
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (double c : s.point(i)) out << format_double(c) << ' ';
        out << format_double(s.weight(i)) << '\n';
    }
}

inline std::string to_text(const Embedding& e) {
    std::ostringstream os;
    write_embedding(os, e);
    return os.str();
}

inline Embedding read_embedding(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<Kernel> kernel;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            kernel = parse_kernel(line);
            break;
        }
    }
    if (!kernel) throw ValidationError("read_embedding: missing kernel descriptor line");
    const std::size_t d = kernel->dim();
    std::vector<double> coords;
    std::vector<double> weights;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view rest = trim(line);
        if (rest.empty()) continue;
        std::vector<double> fields;
        while (!rest.empty()) {
            const std::size_t sp = rest.find_first_of(" \t");
            const std::string_view tok = rest.substr(0, sp);
            try {
                fields.push_back(parse_double(tok));
            } catch (const ValidationError& err) {
                throw ValidationError("read_embedding: line " + std::to_string(line_no) + ": " + err.what());
            }
            rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));
        }
        if (fields.size() != d + 1) {
            throw ValidationError("read_embedding: line " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " + std::to_string(d + 1));
        }
        coords.insert(coords.end(), fields.begin(), fields.end() - 1);
        weights.push_back(fields.back());
    }
    return Embedding(*kernel, WeightedSample(d, std::move(coords), std::move(weights)));
}

inline Embedding from_text(const std::string& text) {
    std::istringstream is(text);
    return read_embedding(is);
}

inline void save_embedding(const std::string& path, const Embedding& e) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_embedding(out, e);
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Embedding load_embedding(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read_embedding(in);
}

} // namespace kme

#endif // KME_SERIALIZATION_HPP
