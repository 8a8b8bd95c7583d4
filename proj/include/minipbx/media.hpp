#ifndef MINIPBX_MEDIA_HPP
#define MINIPBX_MEDIA_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "minipbx/vtime.hpp"

namespace minipbx::media {

// Conventional static payload type for GSM 06.10; the payload itself stays
// opaque here.
inline constexpr std::uint8_t kGsmPayloadType = 3;
inline constexpr std::uint32_t kTimestampStep = 160;  // samples per 20 ms at 8 kHz
inline constexpr VTime kFramePacing = 20;             // ms of virtual time per frame
inline constexpr std::size_t kGsmFrameBytes = 33;
inline constexpr std::size_t kRtpHeaderBytes = 12;

struct RtpFrame {
    std::uint8_t payload_type = kGsmPayloadType;
    std::uint32_t ssrc = 0;
    std::uint16_t seq = 0;
    std::uint32_t timestamp = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const RtpFrame&) const = default;
};

struct MediaSession {
    std::uint32_t ssrc = 0;
    std::uint16_t next_seq = 0;
    std::uint32_t next_timestamp = 0;
    std::uint64_t frame_count = 0;
};

// Emits a frame with the session's current counters, then advances them by
// (1, 160) with 16/32-bit wraparound.
RtpFrame next_frame(MediaSession& s, std::vector<std::uint8_t> payload);

class RtpCodecError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed 12-octet header, big-endian fields, version 2.
std::vector<std::uint8_t> rtp_encode(const RtpFrame& f);
RtpFrame rtp_decode(const std::vector<std::uint8_t>& bytes);

bool looks_like_rtp(const std::vector<std::uint8_t>& bytes);

// Per-run allocators; two sessions never share an SSRC, RTP ports are high
// and even.
class SsrcAllocator {
public:
    std::uint32_t next() { return next_++; }

private:
    std::uint32_t next_ = 0x02000001;
};

class RtpPortAllocator {
public:
    std::uint16_t next() {
        std::uint16_t p = next_;
        next_ = std::uint16_t(next_ + 2);
        return p;
    }

private:
    std::uint16_t next_ = 40000;
};

struct DtmfEvent {
    char digit = '0';  // 0-9, '*', '#'
    std::string call_id;
};

bool valid_dtmf_digit(char c);

}  // namespace minipbx::media

#endif
