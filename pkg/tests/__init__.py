# Test package for FastAPI Property Evaluation System 