# Repository layer: run files and simulation artifacts on disk
