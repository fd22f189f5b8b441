#include "storyweaver/dialogue.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

#include "storyweaver/error.hpp"

namespace storyweaver {

std::string_view trim(std::string_view text) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string_view to_string(Speaker speaker) {
    return speaker == Speaker::User ? "user" : "system";
}

Speaker parse_speaker(std::string_view name) {
    if (name == "user") return Speaker::User;
    if (name == "system") return Speaker::System;
    throw InvalidArgument("unknown speaker: " + std::string(name));
}

Turn::Turn(Speaker speaker, std::string text, std::size_t index)
    : speaker_(speaker), text_(std::move(text)), index_(index) {
    if (trim(text_).empty()) throw InvalidArgument("turn text is empty");
}

DialogueState::DialogueState(std::size_t context_window) : context_window_(context_window) {
    if (context_window_ == 0) throw InvalidArgument("context window must be >= 1");
}

DialogueState DialogueState::with_turn(Speaker speaker, std::string text) const {
    DialogueState next = *this;
    next.push(speaker, std::move(text));
    return next;
}

const Turn& DialogueState::push(Speaker speaker, std::string text) {
    turns_.emplace_back(speaker, std::move(text), turns_.size());
    return turns_.back();
}

std::span<const Turn> window(const DialogueState& state) {
    const auto& turns = state.turns();
    const std::size_t n = std::min(state.context_window(), turns.size());
    return std::span<const Turn>(turns).subspan(turns.size() - n);
}

std::string_view last_text(const DialogueState& state) {
    return state.empty() ? std::string_view{} : std::string_view(state.turns().back().text());
}

std::string_view to_string(Source source) {
    switch (source) {
    case Source::Topic: return "TOPIC";
    case Source::Context: return "CONTEXT";
    case Source::Poetry: return "POETRY";
    }
    return "?";
}

Source parse_source(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "TOPIC") return Source::Topic;
    if (upper == "CONTEXT") return Source::Context;
    if (upper == "POETRY") return Source::Poetry;
    throw InvalidArgument("unknown subsystem: " + std::string(name));
}

Proposal::Proposal(Source source_, std::string text_, double certainty_)
    : source(source_), text(std::move(text_)), certainty(certainty_) {
    if (trim(text).empty()) throw InvalidArgument("proposal text is empty");
    if (!(certainty >= 0.0 && certainty <= 1.0))
        throw InvalidArgument("proposal certainty outside [0,1]");
}

std::string to_json_line(const TranscriptRecord& record) {
    nlohmann::ordered_json j;
    j["index"] = record.index;
    j["speaker"] = to_string(record.speaker);
    j["text"] = record.text;
    j["ts"] = record.ts;
    return j.dump();
}

TranscriptRecord parse_transcript_line(std::string_view line) {
    auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw InvalidArgument("malformed transcript record");
    try {
        return TranscriptRecord{j.at("index").get<std::size_t>(),
                                parse_speaker(j.at("speaker").get<std::string>()),
                                j.at("text").get<std::string>(), j.at("ts").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed transcript record: ") + e.what());
    }
}

DialogueState replay(std::span<const TranscriptRecord> records, std::size_t context_window) {
    DialogueState state(context_window);
    for (const auto& record : records) {
        if (record.index != state.size())
            throw InvalidArgument("transcript index gap at " + std::to_string(record.index));
        state.push(record.speaker, record.text);
    }
    return state;
}

}  // namespace storyweaver
