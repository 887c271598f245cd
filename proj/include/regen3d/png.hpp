#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "regen3d/core.hpp"

namespace regen3d {

// Minimal PNG codec. Writer emits 8-bit gray/gray+alpha/RGB/RGBA with
// filter 0 scanlines in stored (uncompressed) deflate blocks; reader handles
// any zlib stream (stored, fixed and dynamic Huffman) and filters 0-4,
// non-interlaced 8-bit images only.
namespace png {

inline uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return ~crc;
}

inline uint32_t adler32(const uint8_t* data, size_t n) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, uint32_t(data.size()));
    std::vector<uint8_t> body(4 + data.size());
    std::memcpy(body.data(), type, 4);
    std::memcpy(body.data() + 4, data.data(), data.size());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32(body.data(), body.size()));
}

struct BitReader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;
    uint32_t bitbuf = 0;
    int bitcount = 0;

    uint32_t bits(int n) {
        while (bitcount < n) {
            check(pos < size, "png: truncated deflate stream");
            bitbuf |= uint32_t(data[pos++]) << bitcount;
            bitcount += 8;
        }
        const uint32_t v = bitbuf & ((1u << n) - 1u);
        bitbuf >>= n;
        bitcount -= n;
        return v;
    }
    void align_byte() {
        bitbuf = 0;
        bitcount = 0;
    }
};

// canonical Huffman decoder built from code lengths
struct Huffman {
    std::vector<int> counts;   // codes per length
    std::vector<int> symbols;  // symbols ordered by (length, symbol)

    void build(const std::vector<int>& lengths) {
        int maxlen = 0;
        for (int l : lengths) maxlen = std::max(maxlen, l);
        counts.assign(size_t(maxlen) + 1, 0);
        for (int l : lengths)
            if (l > 0) counts[size_t(l)]++;
        symbols.clear();
        std::vector<int> offsets(size_t(maxlen) + 2, 0);
        for (int l = 1; l <= maxlen; ++l) offsets[size_t(l) + 1] = offsets[size_t(l)] + counts[size_t(l)];
        symbols.assign(size_t(offsets[size_t(maxlen) + 1]), 0);
        for (size_t s = 0; s < lengths.size(); ++s)
            if (lengths[s] > 0) symbols[size_t(offsets[size_t(lengths[s])]++)] = int(s);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (size_t len = 1; len < counts.size(); ++len) {
            code |= int(br.bits(1));
            const int count = counts[len];
            if (code - first < count) return symbols[size_t(index + (code - first))];
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        throw std::runtime_error("png: invalid Huffman code");
    }
};

inline std::vector<uint8_t> inflate(const uint8_t* data, size_t size) {
    BitReader br{data, size};
    std::vector<uint8_t> out;
    static const int length_base[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                                        31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
    static const int length_extra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                         2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
    static const int dist_base[30] = {1,    2,    3,    4,    5,    7,     9,     13,    17,  25,
                                      33,   49,   65,   97,   129,  193,   257,   385,   513, 769,
                                      1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
    static const int dist_extra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                       6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};
    bool final_block = false;
    while (!final_block) {
        final_block = br.bits(1) != 0;
        const uint32_t type = br.bits(2);
        if (type == 0) {
            br.align_byte();
            check(br.pos + 4 <= br.size, "png: truncated stored block");
            const uint32_t len = uint32_t(br.data[br.pos]) | (uint32_t(br.data[br.pos + 1]) << 8);
            const uint32_t nlen = uint32_t(br.data[br.pos + 2]) | (uint32_t(br.data[br.pos + 3]) << 8);
            check((len ^ 0xffffu) == nlen, "png: stored block length check failed");
            br.pos += 4;
            check(br.pos + len <= br.size, "png: truncated stored block data");
            out.insert(out.end(), br.data + br.pos, br.data + br.pos + len);
            br.pos += len;
        } else if (type == 1 || type == 2) {
            Huffman lit, dist;
            if (type == 1) {
                std::vector<int> ll(288);
                for (int i = 0; i < 144; ++i) ll[size_t(i)] = 8;
                for (int i = 144; i < 256; ++i) ll[size_t(i)] = 9;
                for (int i = 256; i < 280; ++i) ll[size_t(i)] = 7;
                for (int i = 280; i < 288; ++i) ll[size_t(i)] = 8;
                lit.build(ll);
                dist.build(std::vector<int>(30, 5));
            } else {
                const int hlit = int(br.bits(5)) + 257;
                const int hdist = int(br.bits(5)) + 1;
                const int hclen = int(br.bits(4)) + 4;
                static const int perm[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};
                std::vector<int> clen(19, 0);
                for (int i = 0; i < hclen; ++i) clen[size_t(perm[i])] = int(br.bits(3));
                Huffman code_huff;
                code_huff.build(clen);
                std::vector<int> lengths;
                lengths.reserve(size_t(hlit + hdist));
                while (int(lengths.size()) < hlit + hdist) {
                    const int sym = code_huff.decode(br);
                    if (sym < 16) {
                        lengths.push_back(sym);
                    } else if (sym == 16) {
                        check(!lengths.empty(), "png: repeat with no previous length");
                        const int rep = 3 + int(br.bits(2));
                        for (int i = 0; i < rep; ++i) lengths.push_back(lengths.back());
                    } else if (sym == 17) {
                        const int rep = 3 + int(br.bits(3));
                        for (int i = 0; i < rep; ++i) lengths.push_back(0);
                    } else {
                        const int rep = 11 + int(br.bits(7));
                        for (int i = 0; i < rep; ++i) lengths.push_back(0);
                    }
                }
                check(int(lengths.size()) == hlit + hdist, "png: code length overflow");
                lit.build(std::vector<int>(lengths.begin(), lengths.begin() + hlit));
                dist.build(std::vector<int>(lengths.begin() + hlit, lengths.end()));
            }
            while (true) {
                const int sym = lit.decode(br);
                if (sym < 256) {
                    out.push_back(uint8_t(sym));
                } else if (sym == 256) {
                    break;
                } else {
                    check(sym - 257 < 29, "png: bad length symbol");
                    const int len = length_base[sym - 257] + int(br.bits(length_extra[sym - 257]));
                    const int dsym = dist.decode(br);
                    check(dsym < 30, "png: bad distance symbol");
                    const int distance = dist_base[dsym] + int(br.bits(dist_extra[dsym]));
                    check(size_t(distance) <= out.size(), "png: distance exceeds output");
                    const size_t start = out.size() - size_t(distance);
                    for (int i = 0; i < len; ++i) out.push_back(out[start + size_t(i)]);
                }
            }
        } else {
            throw std::runtime_error("png: reserved deflate block type");
        }
    }
    return out;
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

// pixels: row-major, 8-bit, `channels` interleaved samples per pixel
inline void write_png(const std::string& path, const std::vector<uint8_t>& pixels, int width,
                      int height, int channels) {
    check(width > 0 && height > 0, "write_png: empty image");
    check(channels >= 1 && channels <= 4 && channels != 0, "write_png: unsupported channel count");
    check(pixels.size() == size_t(width) * size_t(height) * size_t(channels),
          "write_png: pixel buffer size mismatch");
    static const int color_type_for[5] = {0, 0, 4, 2, 6};
    std::vector<uint8_t> out;
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);
    std::vector<uint8_t> ihdr;
    detail::put_u32(ihdr, uint32_t(width));
    detail::put_u32(ihdr, uint32_t(height));
    ihdr.push_back(8);
    ihdr.push_back(uint8_t(color_type_for[channels]));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::put_chunk(out, "IHDR", ihdr);

    // raw scanlines with filter byte 0
    const size_t stride = size_t(width) * size_t(channels);
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * size_t(height));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + long(y) * long(stride),
                   pixels.begin() + long(y + 1) * long(stride));
    }
    // zlib stream with stored deflate blocks
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t off = 0;
    while (off < raw.size() || raw.empty()) {
        const size_t n = std::min<size_t>(65535, raw.size() - off);
        const bool last = off + n >= raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(uint8_t(n & 0xff));
        z.push_back(uint8_t(n >> 8));
        z.push_back(uint8_t(~n & 0xff));
        z.push_back(uint8_t((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + long(off), raw.begin() + long(off + n));
        off += n;
        if (last) break;
    }
    detail::put_u32(z, adler32(raw.data(), raw.size()));
    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    check(f.good(), "write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), long(out.size()));
    check(f.good(), "write_png: write failed for " + path);
}

struct PngImage {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> pixels;
};

inline PngImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "read_png: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    check(buf.size() > 8, "read_png: file too small");
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    check(std::memcmp(buf.data(), sig, 8) == 0, "read_png: bad signature");
    size_t pos = 8;
    PngImage img;
    int bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    auto read_u32 = [&](size_t p) {
        return (uint32_t(buf[p]) << 24) | (uint32_t(buf[p + 1]) << 16) | (uint32_t(buf[p + 2]) << 8) |
               uint32_t(buf[p + 3]);
    };
    while (pos + 8 <= buf.size()) {
        const uint32_t len = read_u32(pos);
        check(pos + 12 + len <= buf.size(), "read_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        const uint8_t* data = buf.data() + pos + 8;
        const uint32_t expect_crc = read_u32(pos + 8 + len);
        check(crc32(buf.data() + pos + 4, len + 4) == expect_crc, "read_png: chunk CRC mismatch");
        if (std::memcmp(type, "IHDR", 4) == 0) {
            img.width = int(read_u32(pos + 8));
            img.height = int(read_u32(pos + 12));
            bit_depth = data[8];
            color_type = data[9];
            check(bit_depth == 8, "read_png: only 8-bit images supported");
            check(data[12] == 0, "read_png: interlaced images not supported");
            switch (color_type) {
                case 0: img.channels = 1; break;
                case 2: img.channels = 3; break;
                case 4: img.channels = 2; break;
                case 6: img.channels = 4; break;
                default: throw std::runtime_error("read_png: unsupported color type");
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    check(img.width > 0 && img.height > 0, "read_png: missing IHDR");
    check(idat.size() > 2, "read_png: missing IDAT");
    // zlib: skip 2-byte header, verify adler at the end
    const std::vector<uint8_t> raw = detail::inflate(idat.data() + 2, idat.size() - 6);
    const size_t stride = size_t(img.width) * size_t(img.channels);
    check(raw.size() == (stride + 1) * size_t(img.height), "read_png: decompressed size mismatch");
    {
        const uint32_t expect = (uint32_t(idat[idat.size() - 4]) << 24) |
                                (uint32_t(idat[idat.size() - 3]) << 16) |
                                (uint32_t(idat[idat.size() - 2]) << 8) | uint32_t(idat[idat.size() - 1]);
        check(adler32(raw.data(), raw.size()) == expect, "read_png: adler32 mismatch");
    }
    img.pixels.assign(stride * size_t(img.height), 0);
    const int bpp = img.channels;
    std::vector<uint8_t> prev(stride, 0);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t* src = raw.data() + size_t(y) * (stride + 1);
        const int filter = src[0];
        uint8_t* dst = img.pixels.data() + size_t(y) * stride;
        for (size_t x = 0; x < stride; ++x) {
            const int a = x >= size_t(bpp) ? dst[x - size_t(bpp)] : 0;
            const int b = prev[x];
            const int c = x >= size_t(bpp) ? prev[x - size_t(bpp)] : 0;
            int v = src[1 + x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, c); break;
                default: throw std::runtime_error("read_png: unknown filter type");
            }
            dst[x] = uint8_t(v & 0xff);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

}  // namespace png
}  // namespace regen3d
