# Command handlers for the membrane toolkit CLI
