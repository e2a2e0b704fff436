# Numerical services and the run drivers built on them
