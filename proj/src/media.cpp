#include "minipbx/media.hpp"

#include <string>

namespace minipbx::media {

RtpFrame next_frame(MediaSession& s, std::vector<std::uint8_t> payload) {
    RtpFrame f;
    f.ssrc = s.ssrc;
    f.seq = s.next_seq;
    f.timestamp = s.next_timestamp;
    f.payload = std::move(payload);
    s.next_seq = std::uint16_t(s.next_seq + 1);
    s.next_timestamp += kTimestampStep;  // uint32 arithmetic wraps mod 2^32
    ++s.frame_count;
    return f;
}

std::vector<std::uint8_t> rtp_encode(const RtpFrame& f) {
    std::vector<std::uint8_t> out;
    out.reserve(kRtpHeaderBytes + f.payload.size());
    out.push_back(0x80);  // V=2, P=0, X=0, CC=0
    out.push_back(f.payload_type & 0x7f);
    out.push_back(std::uint8_t(f.seq >> 8));
    out.push_back(std::uint8_t(f.seq));
    out.push_back(std::uint8_t(f.timestamp >> 24));
    out.push_back(std::uint8_t(f.timestamp >> 16));
    out.push_back(std::uint8_t(f.timestamp >> 8));
    out.push_back(std::uint8_t(f.timestamp));
    out.push_back(std::uint8_t(f.ssrc >> 24));
    out.push_back(std::uint8_t(f.ssrc >> 16));
    out.push_back(std::uint8_t(f.ssrc >> 8));
    out.push_back(std::uint8_t(f.ssrc));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

RtpFrame rtp_decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kRtpHeaderBytes)
        throw RtpCodecError("short RTP buffer: " + std::to_string(bytes.size()) + " octets");
    if ((bytes[0] >> 6) != 2)
        throw RtpCodecError("unsupported RTP version " + std::to_string(bytes[0] >> 6));
    RtpFrame f;
    f.payload_type = bytes[1] & 0x7f;
    f.seq = std::uint16_t((bytes[2] << 8) | bytes[3]);
    f.timestamp = (std::uint32_t(bytes[4]) << 24) | (std::uint32_t(bytes[5]) << 16) |
                  (std::uint32_t(bytes[6]) << 8) | std::uint32_t(bytes[7]);
    f.ssrc = (std::uint32_t(bytes[8]) << 24) | (std::uint32_t(bytes[9]) << 16) |
             (std::uint32_t(bytes[10]) << 8) | std::uint32_t(bytes[11]);
    f.payload.assign(bytes.begin() + kRtpHeaderBytes, bytes.end());
    return f;
}

bool looks_like_rtp(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= kRtpHeaderBytes && (bytes[0] >> 6) == 2;
}

bool valid_dtmf_digit(char c) {
    return (c >= '0' && c <= '9') || c == '*' || c == '#';
}

}  // namespace minipbx::media
