"""Seeded synthetic clips for tests, benchmarks and demos.

The two-class corpus pairs fast and slow oscillating sprites whose peak
speeds match, so short windows see similar motion while long windows expose
the period difference.
"""

import numpy as np

from .media import FrameSequence

import cv2


def noise_texture(rng, height, width, blur_sigma=1.0, low=0, high=256):
    """Smoothed uint8 noise with usable gradients everywhere."""
    tex = rng.integers(low, high, size=(height, width)).astype(np.uint8)
    if blur_sigma > 0:
        tex = cv2.GaussianBlur(tex, (0, 0), blur_sigma)
    return tex


def translation_clip(n_frames, height, width, velocity=(1, 0), seed=0, blur_sigma=1.0):
    """Texture translating by an exact integer displacement per frame (wrapping)."""
    rng = np.random.default_rng(seed)
    tex = noise_texture(rng, height, width, blur_sigma)
    vx, vy = int(velocity[0]), int(velocity[1])
    frames = [np.roll(tex, shift=(t * vy, t * vx), axis=(0, 1)) for t in range(n_frames)]
    return FrameSequence(frames=np.stack(frames), fps=25.0)


def oscillating_sprite_clip(n_frames, height, width, period, amplitude, seed=0,
                            n_sprites=2, sprite_size=14, background_contrast=60):
    """Textured sprites oscillating horizontally over a low-contrast background.

    Peak speed is amplitude * 2 * pi / period, so matching amplitude/period
    ratios give clips that only differ in how long one motion cycle takes.
    """
    rng = np.random.default_rng(seed)
    background = noise_texture(rng, height, width, blur_sigma=1.2,
                               low=128 - background_contrast, high=128 + background_contrast)
    sprites = []
    margin = int(np.ceil(amplitude)) + sprite_size // 2 + 2
    for _ in range(n_sprites):
        patch = noise_texture(rng, sprite_size, sprite_size, blur_sigma=0.6)
        cx = rng.integers(margin, max(margin + 1, width - margin))
        cy = rng.integers(sprite_size // 2 + 2, height - sprite_size // 2 - 2)
        phase = rng.uniform(0.0, period)
        sprites.append((patch, int(cx), int(cy), float(phase)))
    frames = np.empty((n_frames, height, width), dtype=np.uint8)
    half = sprite_size // 2
    for t in range(n_frames):
        frame = background.copy()
        for patch, cx, cy, phase in sprites:
            x = cx + amplitude * np.sin(2.0 * np.pi * (t + phase) / period)
            xi = int(np.floor(x + 0.5))
            x0 = np.clip(xi - half, 0, width - sprite_size)
            y0 = np.clip(cy - half, 0, height - sprite_size)
            frame[y0:y0 + sprite_size, x0:x0 + sprite_size] = patch
        frames[t] = frame
    return FrameSequence(frames=frames, fps=25.0)


def two_class_corpus(n_per_class=40, n_frames=120, height=60, width=80,
                     fast_period=10.0, slow_period=60.0, peak_speed=2.2, seed=0):
    """Fast-vs-slow oscillation corpus; returns [(clip_id, label, FrameSequence)].

    Amplitude scales with the period so both classes share the same peak
    speed; only the motion's time scale separates them.
    """
    clips = []
    for offset, (label, period) in enumerate((("fast", fast_period), ("slow", slow_period))):
        amplitude = peak_speed * period / (2.0 * np.pi)
        for i in range(n_per_class):
            clip_seed = seed * 100003 + offset * 50021 + i
            seq = oscillating_sprite_clip(n_frames, height, width, period, amplitude,
                                          seed=clip_seed)
            clips.append((f"{label}_{i:03d}", label, seq))
    return clips
