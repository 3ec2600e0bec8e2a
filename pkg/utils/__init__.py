# Utils package for the membrane stress toolkit
