#include "core/png_io.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace raseg {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
    uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    return c;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) t[n] = crc32_table_entry(n);
        return t;
    }();
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc;
}

uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, uint32_t(data.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32(body.data(), body.size()) ^ 0xffffffffu);
}

uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

}  // namespace

void write_png(const std::string& path, const uint8_t* data, int width, int height,
               int channels) {
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("write_png: only 1 or 3 channels supported");

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, uint32_t(width));
    put_u32(ihdr, uint32_t(height));
    ihdr.push_back(8);                             // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);         // gray / rgb
    ihdr.push_back(0);                             // compression
    ihdr.push_back(0);                             // filter
    ihdr.push_back(0);                             // no interlace

    // raw stream: filter byte 0 + scanline, per row
    const size_t row = size_t(width) * size_t(channels);
    std::vector<uint8_t> raw;
    raw.reserve((row + 1) * size_t(height));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), data + size_t(y) * row, data + size_t(y + 1) * row);
    }

    // zlib wrapper with stored deflate blocks
    std::vector<uint8_t> idat{0x78, 0x01};
    size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        const size_t n = std::min<size_t>(65535, raw.size() - off);
        const bool final = off + n == raw.size();
        idat.push_back(final ? 1 : 0);
        idat.push_back(uint8_t(n & 0xff));
        idat.push_back(uint8_t(n >> 8));
        idat.push_back(uint8_t(~n & 0xff));
        idat.push_back(uint8_t((~n >> 8) & 0xff));
        idat.insert(idat.end(), raw.begin() + long(off), raw.begin() + long(off + n));
        off += n;
        if (final) break;
    }
    put_u32(idat, adler32(raw.data(), raw.size()));

    std::vector<uint8_t> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", idat);
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), long(out.size()));
}

PngImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw std::runtime_error("read_png: not a png file: " + path);

    PngImage img;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = get_u32(&bytes[pos]);
        const std::string type(bytes.begin() + long(pos + 4), bytes.begin() + long(pos + 8));
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("read_png: truncated chunk");
        const uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            img.width = int(get_u32(data));
            img.height = int(get_u32(data + 4));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
                throw std::runtime_error("read_png: unsupported format: " + path);
            img.channels = color == 0 ? 1 : 3;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }

    if (idat.size() < 2) throw std::runtime_error("read_png: missing image data");
    // stored deflate blocks only
    std::vector<uint8_t> raw;
    size_t p = 2;
    while (true) {
        if (p >= idat.size()) throw std::runtime_error("read_png: truncated deflate stream");
        const uint8_t header = idat[p++];
        if ((header & 0x06) != 0)
            throw std::runtime_error("read_png: compressed png not supported");
        const uint16_t n = uint16_t(idat[p] | (idat[p + 1] << 8));
        p += 4;  // len + nlen
        raw.insert(raw.end(), idat.begin() + long(p), idat.begin() + long(p + n));
        p += n;
        if (header & 1) break;
    }

    const size_t row = size_t(img.width) * size_t(img.channels);
    if (raw.size() != (row + 1) * size_t(img.height))
        throw std::runtime_error("read_png: unexpected stream length");
    img.data.reserve(row * size_t(img.height));
    for (int y = 0; y < img.height; ++y) {
        if (raw[size_t(y) * (row + 1)] != 0)
            throw std::runtime_error("read_png: unsupported filter type");
        img.data.insert(img.data.end(), raw.begin() + long(size_t(y) * (row + 1) + 1),
                        raw.begin() + long(size_t(y + 1) * (row + 1)));
    }
    return img;
}

}  // namespace raseg
