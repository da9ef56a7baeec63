#include "posebench/ply_io.hpp"

#include <cctype>
#include <charconv>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "posebench/fs_util.hpp"

namespace posebench {

namespace {

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t scalar_size(ScalarType t) {
    switch (t) {
        case ScalarType::I8:
        case ScalarType::U8:
            return 1;
        case ScalarType::I16:
        case ScalarType::U16:
            return 2;
        case ScalarType::I32:
        case ScalarType::U32:
        case ScalarType::F32:
            return 4;
        case ScalarType::F64:
            return 8;
    }
    return 0;
}

ScalarType parse_scalar_type(const std::string& name, std::size_t offset) {
    if (name == "char" || name == "int8") return ScalarType::I8;
    if (name == "uchar" || name == "uint8") return ScalarType::U8;
    if (name == "short" || name == "int16") return ScalarType::I16;
    if (name == "ushort" || name == "uint16") return ScalarType::U16;
    if (name == "int" || name == "int32") return ScalarType::I32;
    if (name == "uint" || name == "uint32") return ScalarType::U32;
    if (name == "float" || name == "float32") return ScalarType::F32;
    if (name == "double" || name == "float64") return ScalarType::F64;
    ParseError err("unknown property type '" + name + "'");
    err.byte_offset = static_cast<long long>(offset);
    throw err;
}

struct Property {
    std::string name;
    bool is_list = false;
    ScalarType count_type = ScalarType::U8;  // list only
    ScalarType value_type = ScalarType::F32;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
};

[[noreturn]] void fail(const std::string& msg, std::size_t offset) {
    ParseError err(msg);
    err.byte_offset = static_cast<long long>(offset);
    throw err;
}

// Cursor over the whole file contents; keeps the byte offset for diagnostics.
class Reader {
public:
    Reader(std::string data, std::string origin)
        : data_(std::move(data)), origin_(std::move(origin)) {}

    std::size_t offset() const { return pos_; }
    const std::string& origin() const { return origin_; }

    std::string line() {
        if (pos_ >= data_.size()) {
            fail(origin_ + ": unexpected end of file in header", pos_);
        }
        const std::size_t start = pos_;
        const std::size_t nl = data_.find('\n', start);
        std::string out;
        if (nl == std::string::npos) {
            out = data_.substr(start);
            pos_ = data_.size();
        } else {
            out = data_.substr(start, nl - start);
            pos_ = nl + 1;
        }
        if (!out.empty() && out.back() == '\r') {
            out.pop_back();
        }
        return out;
    }

    std::string_view ascii_token() {
        while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            ++pos_;
        }
        if (pos_ >= data_.size()) {
            fail(origin_ + ": unexpected end of file in body", pos_);
        }
        const std::size_t start = pos_;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            ++pos_;
        }
        return std::string_view(data_).substr(start, pos_ - start);
    }

    const char* raw(std::size_t n) {
        if (pos_ + n > data_.size()) {
            fail(origin_ + ": file truncated", pos_);
        }
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    std::string data_;
    std::string origin_;
    std::size_t pos_ = 0;
};

double ascii_number(Reader& r) {
    const std::size_t at = r.offset();
    const std::string_view tok = r.ascii_token();
    double value = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        fail(r.origin() + ": expected a number, got '" + std::string(tok) + "'", at);
    }
    return value;
}

double binary_number(Reader& r, ScalarType t) {
    const char* p = r.raw(scalar_size(t));
    switch (t) {
        case ScalarType::I8: {
            std::int8_t v;
            std::memcpy(&v, p, 1);
            return v;
        }
        case ScalarType::U8: {
            std::uint8_t v;
            std::memcpy(&v, p, 1);
            return v;
        }
        case ScalarType::I16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            return v;
        }
        case ScalarType::U16: {
            std::uint16_t v;
            std::memcpy(&v, p, 2);
            return v;
        }
        case ScalarType::I32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return v;
        }
        case ScalarType::U32: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        case ScalarType::F32: {
            float v;
            std::memcpy(&v, p, 4);
            return v;
        }
        case ScalarType::F64: {
            double v;
            std::memcpy(&v, p, 8);
            return v;
        }
    }
    return 0.0;
}

}  // namespace

Mesh load_ply(const std::filesystem::path& path, double unit_to_mm) {
    Reader r(read_text_file(path), path.string());

    if (r.line() != "ply") {
        fail(path.string() + ": missing 'ply' magic", 0);
    }
    bool binary = false;
    bool format_seen = false;
    std::vector<Element> elements;
    for (;;) {
        const std::size_t at = r.offset();
        std::istringstream ls(r.line());
        std::string word;
        ls >> word;
        if (word.empty() || word == "comment" || word == "obj_info") {
            continue;
        }
        if (word == "format") {
            std::string kind, version;
            ls >> kind >> version;
            if (kind == "ascii") {
                binary = false;
            } else if (kind == "binary_little_endian") {
                binary = true;
            } else {
                fail(path.string() + ": unsupported format '" + kind + "'", at);
            }
            format_seen = true;
        } else if (word == "element") {
            Element e;
            long long n = -1;
            ls >> e.name >> n;
            if (e.name.empty() || n < 0) {
                fail(path.string() + ": malformed element declaration", at);
            }
            e.count = static_cast<std::size_t>(n);
            elements.push_back(std::move(e));
        } else if (word == "property") {
            if (elements.empty()) {
                fail(path.string() + ": property before any element", at);
            }
            Property p;
            std::string t;
            ls >> t;
            if (t == "list") {
                std::string ct, vt;
                ls >> ct >> vt >> p.name;
                p.is_list = true;
                p.count_type = parse_scalar_type(ct, at);
                p.value_type = parse_scalar_type(vt, at);
            } else {
                ls >> p.name;
                p.value_type = parse_scalar_type(t, at);
            }
            if (p.name.empty()) {
                fail(path.string() + ": property without a name", at);
            }
            elements.back().props.push_back(std::move(p));
        } else if (word == "end_header") {
            break;
        } else {
            fail(path.string() + ": unknown header keyword '" + word + "'", at);
        }
    }
    if (!format_seen) {
        fail(path.string() + ": header has no format line", r.offset());
    }

    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    auto read_value = [&](ScalarType t) {
        return binary ? binary_number(r, t) : ascii_number(r);
    };

    for (const Element& e : elements) {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        int ix = -1, iy = -1, iz = -1;
        if (is_vertex) {
            for (std::size_t i = 0; i < e.props.size(); ++i) {
                if (e.props[i].name == "x") ix = static_cast<int>(i);
                if (e.props[i].name == "y") iy = static_cast<int>(i);
                if (e.props[i].name == "z") iz = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0) {
                fail(path.string() + ": vertex element lacks x/y/z", r.offset());
            }
            vertices.reserve(e.count);
        }
        for (std::size_t row = 0; row < e.count; ++row) {
            const std::size_t row_at = r.offset();
            Vec3 v = Vec3::Zero();
            std::vector<double> face_indices;
            for (std::size_t pi = 0; pi < e.props.size(); ++pi) {
                const Property& p = e.props[pi];
                if (p.is_list) {
                    const double n = read_value(p.count_type);
                    if (n < 0 || n > 1e6) {
                        fail(path.string() + ": implausible list length", row_at);
                    }
                    for (long long k = 0; k < static_cast<long long>(n); ++k) {
                        const double val = read_value(p.value_type);
                        if (is_face &&
                            (p.name == "vertex_indices" || p.name == "vertex_index")) {
                            face_indices.push_back(val);
                        }
                    }
                } else {
                    const double val = read_value(p.value_type);
                    if (is_vertex) {
                        if (static_cast<int>(pi) == ix) v.x() = val;
                        if (static_cast<int>(pi) == iy) v.y() = val;
                        if (static_cast<int>(pi) == iz) v.z() = val;
                    }
                }
            }
            if (is_vertex) {
                vertices.push_back(v * unit_to_mm);
            }
            if (is_face && !face_indices.empty()) {
                if (face_indices.size() < 3) {
                    fail(path.string() + ": face with fewer than 3 vertices", row_at);
                }
                auto vid = [&](double raw) {
                    if (raw < 0 || raw >= static_cast<double>(vertices.size()) ||
                        raw != std::floor(raw)) {
                        fail(path.string() + ": face references invalid vertex", row_at);
                    }
                    return static_cast<std::uint32_t>(raw);
                };
                // Polygons become a triangle fan; meshes here are triangles
                // nearly always, so this path is rarely more than a formality.
                const std::uint32_t a = vid(face_indices[0]);
                for (std::size_t k = 2; k < face_indices.size(); ++k) {
                    triangles.push_back({a, vid(face_indices[k - 1]), vid(face_indices[k])});
                }
            }
        }
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

void save_ply_ascii(const Mesh& mesh, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices().size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.triangles().size() << "\n";
    out << "property list uchar uint vertex_indices\n";
    out << "end_header\n";
    char buf[96];
    for (const auto& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : mesh.triangles()) {
        out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
    atomic_write_file(path, out.str());
}

void save_ply_binary(const Mesh& mesh, const std::filesystem::path& path) {
    std::string out;
    {
        std::ostringstream head;
        head << "ply\nformat binary_little_endian 1.0\n";
        head << "element vertex " << mesh.vertices().size() << "\n";
        head << "property double x\nproperty double y\nproperty double z\n";
        head << "element face " << mesh.triangles().size() << "\n";
        head << "property list uchar uint vertex_indices\n";
        head << "end_header\n";
        out = head.str();
    }
    auto append = [&](const void* p, std::size_t n) {
        out.append(static_cast<const char*>(p), n);
    };
    for (const auto& v : mesh.vertices()) {
        const double xyz[3] = {v.x(), v.y(), v.z()};
        append(xyz, sizeof xyz);
    }
    for (const auto& t : mesh.triangles()) {
        const std::uint8_t n = 3;
        append(&n, 1);
        const std::uint32_t idx[3] = {t[0], t[1], t[2]};
        append(idx, sizeof idx);
    }
    atomic_write_file(path, out);
}

}  // namespace posebench
