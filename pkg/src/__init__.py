# Package initialization file.
