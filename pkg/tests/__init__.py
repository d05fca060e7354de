# Tests package for the PCOPO workbench
