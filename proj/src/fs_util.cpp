#include "posebench/fs_util.hpp"

#include <fstream>
#include <sstream>

#include "posebench/errors.hpp"

namespace posebench {

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) {
            throw Error("cannot create " + tmp.string());
        }
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) {
            throw Error("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("failed to move " + tmp.string() + " into place: " + ec.message());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFile("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace posebench
