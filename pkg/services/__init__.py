# Numerical services for the membrane stress toolkit
