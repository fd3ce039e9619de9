# wgspec
