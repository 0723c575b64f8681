#include "d3g/backend.hpp"

namespace d3g {

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::synthetic: return "synthetic";
        case BackendKind::file_store: return "file-store";
        case BackendKind::remote: return "remote";
    }
    return "unknown";
}

std::string to_string(ImageSource source) {
    return source == ImageSource::generated ? "generated" : "dataset";
}

std::vector<ImageRef> Backend::generate_images(const GenerationRequest&) {
    throw GenerationUnsupportedError(descriptor().id);
}

std::vector<Embedding> Backend::embed_texts(std::span<const RenderedPrompt> prompts) {
    std::vector<Embedding> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(embed_text(p));
    return out;
}

std::vector<Embedding> Backend::embed_images(std::span<const ImageRef> images) {
    std::vector<Embedding> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(embed_image(img));
    return out;
}

CountingBackend::CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

const BackendDescriptor& CountingBackend::descriptor() const { return inner_->descriptor(); }

Embedding CountingBackend::embed_text(const RenderedPrompt& prompt) {
    text_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->embed_text(prompt);
}

Embedding CountingBackend::embed_image(const ImageRef& image) {
    image_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->embed_image(image);
}

bool CountingBackend::supports_generation() const { return inner_->supports_generation(); }

std::vector<ImageRef> CountingBackend::generate_images(const GenerationRequest& request) {
    generate_calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->generate_images(request);
}

BackendCallCounts CountingBackend::counts() const {
    return BackendCallCounts{
        text_calls_.load(std::memory_order_relaxed),
        image_calls_.load(std::memory_order_relaxed),
        generate_calls_.load(std::memory_order_relaxed),
    };
}

void CountingBackend::reset_counts() {
    text_calls_.store(0, std::memory_order_relaxed);
    image_calls_.store(0, std::memory_order_relaxed);
    generate_calls_.store(0, std::memory_order_relaxed);
}

}  // namespace d3g
