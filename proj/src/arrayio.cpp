#include "diffroll/arrayio.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "diffroll/common.hpp"

namespace diffroll {

namespace {

constexpr uint32_t kMagic = 0x31415244;  // "DRA1"

template <typename T>
void put(std::string& s, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::vector<uint8_t>& b, size_t& pos) {
    if (pos + sizeof(T) > b.size()) throw parse_error("array file truncated");
    T v;
    std::memcpy(&v, b.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<uint8_t> zlib_deflate(const uint8_t* data, size_t n) {
    uLongf bound = compressBound(static_cast<uLong>(n));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(n), 6) != Z_OK)
        throw io_error("zlib deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t n, size_t raw_size) {
    std::vector<uint8_t> out(raw_size);
    uLongf len = static_cast<uLongf>(raw_size);
    if (uncompress(out.data(), &len, data, static_cast<uLong>(n)) != Z_OK ||
        len != raw_size)
        throw parse_error("zlib inflate failed");
    return out;
}

void save_array(const std::string& path, const matf& m) {
    const auto* raw = reinterpret_cast<const uint8_t*>(m.data());
    const size_t raw_size = m.size() * sizeof(float);
    const std::vector<uint8_t> packed = zlib_deflate(raw, raw_size);

    std::string s;
    put(s, kMagic);
    put<uint8_t>(s, 0);  // dtype f32
    put<uint8_t>(s, 1);  // zlib
    put<int32_t>(s, m.rows);
    put<int32_t>(s, m.cols);
    put<uint64_t>(s, raw_size);
    put<uint64_t>(s, packed.size());
    s.append(reinterpret_cast<const char*>(packed.data()), packed.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write array file: " + path);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw io_error("short write: " + path);
}

matf load_array(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open array file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (get<uint32_t>(bytes, pos) != kMagic)
        throw parse_error("bad array file magic: " + path);
    const auto dtype = get<uint8_t>(bytes, pos);
    const auto comp = get<uint8_t>(bytes, pos);
    if (dtype != 0 || comp != 1) throw parse_error("unsupported array encoding: " + path);
    const auto rows = get<int32_t>(bytes, pos);
    const auto cols = get<int32_t>(bytes, pos);
    const auto raw_size = get<uint64_t>(bytes, pos);
    const auto comp_size = get<uint64_t>(bytes, pos);
    if (pos + comp_size > bytes.size()) throw parse_error("array file truncated: " + path);
    if (rows < 0 || cols < 0 ||
        raw_size != static_cast<uint64_t>(rows) * static_cast<uint64_t>(cols) * sizeof(float))
        throw parse_error("array shape/size mismatch: " + path);

    const std::vector<uint8_t> raw = zlib_inflate(bytes.data() + pos, comp_size, raw_size);
    matf m(rows, cols);
    std::memcpy(m.data(), raw.data(), raw.size());
    return m;
}

}  // namespace diffroll
