# Models package for the membrane stress toolkit
