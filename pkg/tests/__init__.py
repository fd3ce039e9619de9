# wgspec Tests
