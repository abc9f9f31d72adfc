#include "phalanx/codec.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace phalanx {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x46, 0x4D, 0x52, 0x00};    // "FMR\0"
constexpr std::array<std::uint8_t, 4> kVersion = {0x20, 0x32, 0x30, 0x00};  // " 20\0"
constexpr std::size_t kHeaderSize = 28;
constexpr std::size_t kMinutiaSize = 6;

[[noreturn]] void fail(CodecFault fault, std::size_t offset, const std::string& what) {
    std::ostringstream msg;
    msg << what << " (offset " << offset << ")";
    throw CodecError(fault, offset, msg.str());
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) |
           static_cast<std::uint32_t>(b[off + 3]);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void need(std::span<const std::uint8_t> b, std::size_t off, std::size_t n) {
    if (off + n > b.size())
        fail(CodecFault::truncated, off, "record truncated, field needs " + std::to_string(n) +
                                             " byte(s) past end of buffer");
}

}  // namespace

MinutiaTemplate parse_template(std::span<const std::uint8_t> bytes, ParseNotes* notes) {
    if (notes) *notes = ParseNotes{};

    need(bytes, 0, 4);
    for (std::size_t i = 0; i < 4; ++i)
        if (bytes[i] != kMagic[i]) fail(CodecFault::bad_magic, i, "bad magic byte");
    need(bytes, 4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        if (bytes[4 + i] != kVersion[i]) fail(CodecFault::bad_magic, 4 + i, "bad version byte");

    need(bytes, 8, 4);
    std::uint32_t declared = read_u32(bytes, 8);
    if (declared != bytes.size())
        fail(CodecFault::length_mismatch, 8,
             "declared length " + std::to_string(declared) + " but buffer holds " +
                 std::to_string(bytes.size()));

    need(bytes, 12, kHeaderSize - 12);
    MinutiaTemplate tpl;
    tpl.header.capture_equipment_id = read_u16(bytes, 12);
    tpl.header.image_width = read_u16(bytes, 14);
    tpl.header.image_height = read_u16(bytes, 16);
    tpl.header.resolution_x = read_u16(bytes, 18);
    tpl.header.resolution_y = read_u16(bytes, 20);
    if (tpl.header.image_width == 0) fail(CodecFault::field_out_of_range, 14, "image width is zero");
    if (tpl.header.image_height == 0) fail(CodecFault::field_out_of_range, 16, "image height is zero");
    if (tpl.header.resolution_x == 0) fail(CodecFault::field_out_of_range, 18, "x resolution is zero");
    if (tpl.header.resolution_y == 0) fail(CodecFault::field_out_of_range, 20, "y resolution is zero");
    if (bytes[22] != 1) fail(CodecFault::field_out_of_range, 22, "view count must be 1");
    if (bytes[23] != 0) fail(CodecFault::field_out_of_range, 23, "reserved byte must be 0");

    tpl.header.finger_position = bytes[24];
    if (tpl.header.finger_position > 10)
        fail(CodecFault::field_out_of_range, 24, "finger position past 10");
    if ((bytes[25] >> 4) != 0) fail(CodecFault::field_out_of_range, 25, "view number must be 0");
    tpl.header.impression_number = bytes[25] & 0x0F;
    if (tpl.header.impression_number < 1 || tpl.header.impression_number > 4)
        fail(CodecFault::field_out_of_range, 25, "impression number outside 1..4");

    std::uint8_t quality_byte = bytes[26];
    if (quality_byte >= 1 && quality_byte <= 5) {
        tpl.nfiq = quality_byte;
    } else if (quality_byte <= 100) {
        // Files written elsewhere sometimes carry a 0..100 quality score here;
        // keep the record usable and let the dataset manifest supply the grade.
        tpl.nfiq = 3;
        if (notes) notes->quality_byte_not_a_grade = true;
    } else {
        fail(CodecFault::field_out_of_range, 26, "finger quality byte past 100");
    }

    std::size_t count = bytes[27];
    std::size_t minutiae_end = kHeaderSize + kMinutiaSize * count;
    need(bytes, kHeaderSize, kMinutiaSize * count);
    tpl.minutiae.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t off = kHeaderSize + kMinutiaSize * i;
        std::uint16_t tx = read_u16(bytes, off);
        std::uint16_t ry = read_u16(bytes, off + 2);
        Minutia m;
        std::uint8_t type_bits = static_cast<std::uint8_t>(tx >> 14);
        if (type_bits > 2) fail(CodecFault::field_out_of_range, off, "minutia type bits are 3");
        m.type = static_cast<MinutiaType>(type_bits);
        m.x = static_cast<std::uint16_t>(tx & 0x3FFF);
        if ((ry >> 14) != 0) fail(CodecFault::field_out_of_range, off + 2, "reserved y bits set");
        m.y = static_cast<std::uint16_t>(ry & 0x3FFF);
        if (m.x >= tpl.header.image_width)
            fail(CodecFault::field_out_of_range, off, "minutia x outside image");
        if (m.y >= tpl.header.image_height)
            fail(CodecFault::field_out_of_range, off + 2, "minutia y outside image");
        m.angle = bytes[off + 4];
        m.quality = bytes[off + 5];
        if (m.quality > 100) fail(CodecFault::field_out_of_range, off + 5, "minutia quality past 100");
        tpl.minutiae.push_back(m);
    }

    need(bytes, minutiae_end, 2);
    std::uint16_t ext_len = read_u16(bytes, minutiae_end);
    if (minutiae_end + 2 + ext_len != bytes.size())
        fail(CodecFault::length_mismatch, minutiae_end,
             "extended data length inconsistent with record length");
    if (ext_len > 0 && notes) {
        notes->skipped_extended_data = true;
        notes->extended_data_length = ext_len;
    }
    return tpl;
}

std::vector<std::uint8_t> serialize_template(const MinutiaTemplate& tpl) {
    auto invalid = [](const std::string& what) -> void {
        throw CodecError(CodecFault::invariant_violation, 0, "cannot serialize: " + what);
    };
    const TemplateHeader& h = tpl.header;
    if (h.image_width == 0 || h.image_height == 0) invalid("image dimensions are zero");
    if (h.image_width > 0x3FFF || h.image_height > 0x3FFF) invalid("image dimensions past 14 bits");
    if (h.resolution_x == 0 || h.resolution_y == 0) invalid("resolution is zero");
    if (h.finger_position > 10) invalid("finger position past 10");
    if (h.impression_number < 1 || h.impression_number > 4) invalid("impression number outside 1..4");
    if (tpl.nfiq < 1 || tpl.nfiq > 5) invalid("quality grade outside 1..5");
    if (tpl.minutiae.size() > 255) invalid("more than 255 minutiae");
    for (std::size_t i = 0; i < tpl.minutiae.size(); ++i) {
        const Minutia& m = tpl.minutiae[i];
        std::string at = "minutia " + std::to_string(i);
        if (m.x >= h.image_width) invalid(at + " x outside image");
        if (m.y >= h.image_height) invalid(at + " y outside image");
        if (m.x > 0x3FFF || m.y > 0x3FFF) invalid(at + " coordinate past 14 bits");
        if (m.quality > 100) invalid(at + " quality past 100");
        if (static_cast<int>(m.type) > 2) invalid(at + " type invalid");
    }

    std::uint32_t total = static_cast<std::uint32_t>(30 + 6 * tpl.minutiae.size());
    std::vector<std::uint8_t> out;
    out.reserve(total);
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    out.insert(out.end(), kVersion.begin(), kVersion.end());
    put_u32(out, total);
    put_u16(out, h.capture_equipment_id);
    put_u16(out, h.image_width);
    put_u16(out, h.image_height);
    put_u16(out, h.resolution_x);
    put_u16(out, h.resolution_y);
    out.push_back(1);  // view count
    out.push_back(0);  // reserved
    out.push_back(h.finger_position);
    out.push_back(static_cast<std::uint8_t>(h.impression_number & 0x0F));
    out.push_back(static_cast<std::uint8_t>(tpl.nfiq));
    out.push_back(static_cast<std::uint8_t>(tpl.minutiae.size()));
    for (const Minutia& m : tpl.minutiae) {
        put_u16(out, static_cast<std::uint16_t>((static_cast<std::uint16_t>(m.type) << 14) | m.x));
        put_u16(out, m.y);
        out.push_back(m.angle);
        out.push_back(m.quality);
    }
    put_u16(out, 0);  // no extended data
    return out;
}

MinutiaTemplate read_template_file(const std::filesystem::path& path, ParseNotes* notes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolError(ProtocolFault::missing_template, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return parse_template(bytes, notes);
    } catch (const CodecError& e) {
        throw CodecError(e.fault(), e.offset(), path.string() + ": " + e.what());
    }
}

void write_template_file(const std::filesystem::path& path, const MinutiaTemplate& tpl) {
    std::vector<std::uint8_t> bytes = serialize_template(tpl);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path.string());
}

}  // namespace phalanx
