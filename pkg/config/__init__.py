# Configuration package for the membrane stress toolkit
